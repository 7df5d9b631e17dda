use std::path::PathBuf;

use ffcn::branch::{analyze, exact_first_seeds, h_vector, rationalize, Analysis, BranchConfig, Case, Domain, Problem, Value};
use ffcn::continuation::Side;
use ffcn::exact::{q, qf};
use ffcn::network::{load_network, load_spec, CoalescenceSpec};
use ffcn::system::{parse_jet, DiffusiveJet};
use ffcn::{Error, Q};
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn spec(fig: &str) -> CoalescenceSpec {
    load_spec(&data(&format!("{fig}.spec"))).unwrap()
}

fn jet(fig: &str) -> DiffusiveJet {
    parse_jet(&std::fs::read_to_string(data(&format!("{fig}.jet"))).unwrap(), None).unwrap()
}

fn run(fig: &str) -> Analysis {
    analyze(&spec(fig), &jet(fig), &BranchConfig::default()).unwrap()
}

fn exact(v: &Value) -> Q {
    v.as_exact().cloned().unwrap_or_else(|| panic!("expected an exact value, got {v}"))
}

fn cases(a: &Analysis) -> Vec<Case> {
    a.predictions.iter().map(|p| p.case).collect()
}

#[test]
fn fig4_sqrt_branches() {
    let a = run("fig4");
    assert!(a.problem.in_first && a.problem.in_second && !a.problem.lc_in_image);
    assert_eq!(cases(&a), vec![Case::LinearCase, Case::SqrtCase]);
    assert_eq!(exact(&a.seeds[1].bc_prime()), qf(-16, 9));

    let p = &a.predictions[1];
    let k = p.kernel.as_ref().unwrap();
    let lam: Vec<Q> = k.z_lambda.iter().map(exact).collect();
    // The forcing enters through h_1 L^c, which is -h_1 on both tail cells.
    assert_eq!(lam[..3], [q(0), qf(-27, 32), qf(459, 128)]);
    assert!(k.z_second.iter().all(|(_, z)| z.is_zero(0.0)));
    assert_eq!(p.count_on(Side::Negative), 2);
    assert_eq!(p.count_on(Side::Positive), 0);
    assert_eq!(p.lambda_domain(), Domain::NegativeOnly);
    let e = p.growth_exponent_per_cell().unwrap();
    assert_eq!(e[3..], [qf(1, 2), qf(1, 2)]);

    let h = a.h.as_ref().unwrap();
    assert_eq!(h.h, vec![qf(3, 2), qf(3, 2)]);
    assert_eq!(h.structural, h.h);
    assert!(!h.in_image);
}

#[test]
fn fig5_quarter_root() {
    let a = run("fig5");
    assert_eq!(cases(&a), vec![Case::DegenerateUnclassified, Case::QuarterRootCase]);
    assert_eq!(exact(&a.seeds[1].bc_prime()), qf(-5, 3));
    let p = &a.predictions[1];
    let k = p.kernel.as_ref().unwrap();
    let lam: Vec<Q> = k.z_lambda.iter().map(exact).collect();
    assert_eq!(lam, vec![q(0), q(0), q(0), qf(-36, 5)]);
    assert_eq!(k.z_second.iter().map(|(c, z)| (*c, exact(z))).collect::<Vec<_>>(), vec![(4, q(2))]);
    assert_eq!(p.growth_exponent_per_cell().unwrap(), [q(0), q(0), q(1), qf(1, 2), qf(1, 4)]);
    assert_eq!(a.h.as_ref().unwrap().h, vec![q(0), q(2)]);
}

#[test]
fn fig7_linear_case() {
    let a = run("fig7");
    assert!(a.problem.lc_in_image);
    assert_eq!(cases(&a), vec![Case::LinearCase, Case::LinearCase]);
    assert_eq!(exact(&a.seeds[1].bc_prime()), qf(8, 5));
    for p in &a.predictions {
        assert_eq!(p.lambda_domain(), Domain::Both);
        assert!(p.growth_exponent_per_cell().unwrap().iter().all(|e| *e <= q(1)));
    }
    // H is quadratic in v.
    let h1 = h_vector(&a.problem, &[q(1), qf(1, 2)]).unwrap();
    let h2 = h_vector(&a.problem, &[q(2), q(1)]).unwrap();
    assert_eq!(h1.h, vec![qf(5, 4), qf(-5, 8)]);
    assert_eq!(h2.h, h1.h.iter().map(|x| x * q(4)).collect::<Vec<_>>());
    assert_eq!(h2.structural, h2.h);
}

#[test]
fn fig2_pitchforks() {
    let a = run("fig2");
    assert_eq!(a.seeds.len(), 4);
    assert_eq!(
        cases(&a),
        vec![Case::PitchforkLSCase, Case::PitchforkLSCase, Case::DegenerateUnclassified, Case::DegenerateUnclassified]
    );
    let h = a.h.as_ref().unwrap();
    assert_eq!(h.v, vec![q(1), q(-1)]);
    assert_eq!(h.h, vec![qf(7, 2), qf(7, 2)]);
    assert!(h.in_image);

    for (i, want) in [(0, q(2)), (1, q(6)), (2, q(0)), (3, q(0))] {
        let ls = a.predictions[i].ls.as_ref().unwrap();
        assert_eq!(exact(&ls.psi_yy), q(0));
        assert_eq!(exact(&ls.psi_ylambda), want);
        assert_eq!(exact(&ls.psi_yyy), qf(353, 80));
    }
    for p in &a.predictions[..2] {
        assert_eq!(p.count_on(Side::Negative), 3);
        assert_eq!(p.count_on(Side::Positive), 1);
        assert!(p.lambda_pp.as_ref().unwrap().signum() < 0);
        assert_eq!(p.lambda_domain(), Domain::NegativeOnly);
    }
    assert_eq!(exact(&a.seeds[2].bc_prime()), qf(8, 5));
}

#[test]
fn first_network_seeds_in_closed_form() {
    let net = load_network(&data("fig4_n1.nw")).unwrap();
    let seeds = exact_first_seeds(&net, &jet("fig4"), &q(1), 5).unwrap();
    assert_eq!(seeds.len(), 2);
    assert!(seeds[0].iter().flatten().all(|c| *c == q(0)));
    assert!(seeds[1][0].iter().all(|c| *c == q(0)));
    assert_eq!(seeds[1][1][1], qf(-16, 9));
    assert_eq!(seeds[1][1], seeds[1][2]);
}

#[test]
fn vanishing_quadratic_coefficient_is_not_classified() {
    let mut j = jet("fig4");
    j.g_xx = qf(-1, 2);
    let a = analyze(&spec("fig4"), &j, &BranchConfig::default()).unwrap();
    assert!(a.predictions.iter().skip(1).all(|p| p.case == Case::DegenerateUnclassified && !p.notes.is_empty()));
}

#[test]
fn preconditions() {
    let d = DiffusiveJet::default_for_mu(&q(1));
    assert!(matches!(Problem::new(&spec("fig1"), &d), Err(Error::Precondition(_))));
    let far = DiffusiveJet::default_for_mu(&q(7));
    let err = Problem::new(&spec("fig4"), &far).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
    assert_eq!(err.exit_code(), 3);
    let mut flat = jet("fig4");
    flat.h_1 = q(0);
    flat.g_x = q(0);
    assert!(Problem::new(&spec("fig4"), &flat).is_err());
}

proptest! {
    #[test]
    fn rationalize_recovers_small_fractions(n in -5000i64..5000, d in 1i64..500) {
        prop_assert_eq!(rationalize(n as f64 / d as f64, 100_000), qf(n, d));
    }

    /// On a kernel with 0/1 entries the reduction and the closed-form slope
    /// agree for any jet; a mismatch comes back as an error.
    #[test]
    fn reduction_slope_matches_closed_form(
        gxx in -6i64..6, gxl in -6i64..6, h11 in -6i64..6, h1l in -6i64..6, h12 in -6i64..6,
    ) {
        let net = load_network(&data("fig4_n1.nw")).unwrap();
        let mut j = DiffusiveJet::default_for_mu(&q(1));
        j.g_xx = qf(gxx, 2);
        j.g_xl = qf(gxl, 3);
        j.h_11 = qf(h11, 4);
        j.h_1l = qf(h1l, 5);
        j.h_12 = qf(h12, 2);
        j.h_22 = -(q(2) * &j.h_12 + &j.h_11);
        let seeds = exact_first_seeds(&net, &j, &q(1), 4).unwrap();
        let den = &j.g_xx + &j.h_11;
        let num = &j.g_xl + &j.h_1l;
        if den != q(0) && num != q(0) {
            prop_assert_eq!(seeds.len(), 2);
            prop_assert_eq!(seeds[1][2][1].clone(), -q(2) * num / den);
        }
    }
}
