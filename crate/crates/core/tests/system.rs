use std::path::PathBuf;

use ffcn::exact::{q, qf, to_f64};
use ffcn::linalg::Mat;
use ffcn::network::{coalesce, load_spec, CoalescenceSpec};
use ffcn::spectral::{eigenvalue_multiplicities, EigenValue};
use ffcn::system::{
    bifurcation_eigenvalue, extract_jet, hessian_tensors, jacobian_origin, parse_jet, realize_polynomial_system,
    AdmissibleSystem, DiffusiveJet,
};
use ffcn::Q;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn spec(fig: &str) -> CoalescenceSpec {
    load_spec(&data(&format!("{fig}.spec"))).unwrap()
}

fn default_jet() -> DiffusiveJet {
    parse_jet(&std::fs::read_to_string(data("default.jet")).unwrap(), Some(&q(1))).unwrap()
}

#[test]
fn linear_jet_jacobian() {
    let net = coalesce(&spec("fig4"));
    let j = jacobian_origin(&net, &DiffusiveJet::linear(q(-1), q(1)));
    assert_eq!(j, net.laplacian().sub(&Mat::identity(5)));
}

#[test]
fn jacobian_examples() {
    let n1 = spec("fig2").first;
    let j = jacobian_origin(&n1, &DiffusiveJet::linear(q(3), q(-1)));
    let m: Vec<(String, usize)> = eigenvalue_multiplicities(&j).into_iter().map(|(v, m)| (v.to_string(), m)).collect();
    assert_eq!(m, vec![("0".into(), 2), ("3".into(), 1)]);
    let j = jacobian_origin(&n1, &DiffusiveJet::linear(q(2), q(0)));
    assert_eq!(j, Mat::identity(3).scale(&q(2)));
}

#[test]
fn jacobian_matches_the_realized_system() {
    let net = coalesce(&spec("fig7"));
    let jet = default_jet().with_mu(&q(3));
    let sys = AdmissibleSystem::new(&net, &jet).unwrap();
    let n = sys.dim();
    let (mut f, mut jac) = (vec![0.0; n], vec![0.0; n * n]);
    sys.residual_jacobian(&vec![0.0; n], 0.0, &mut f, &mut jac);
    let j = jacobian_origin(&net, &jet);
    for i in 0..n {
        for k in 0..n {
            assert_eq!(jac[i * n + k], to_f64(&j[(i, k)]));
        }
    }
}

#[test]
fn bifurcation_eigenvalues() {
    let d = default_jet();
    let net = coalesce(&spec("fig2"));
    assert_eq!(bifurcation_eigenvalue(&net, &d.with_mu(&q(3)), 1e-9).unwrap(), Some(EigenValue::Exact(q(3))));
    assert_eq!(bifurcation_eigenvalue(&net, &d.with_mu(&q(5)), 1e-9).unwrap(), None);
    let net = coalesce(&spec("fig5"));
    assert_eq!(bifurcation_eigenvalue(&net, &d.with_mu(&q(2)), 1e-9).unwrap(), Some(EigenValue::Exact(q(2))));
}

#[test]
fn hessian_of_a_tail_cell() {
    let jet = default_jet();
    let sys = AdmissibleSystem::new(&coalesce(&spec("fig4")), &jet).unwrap();
    let h = hessian_tensors(&sys, 4, &[3, 4, 5]).hessian;
    let (gxx, h11, h12, h22) = (&jet.g_xx, &jet.h_11, &jet.h_12, &jet.h_22);
    let want = Mat::from_rows(&[
        vec![h22.clone(), h12.clone(), q(0)],
        vec![h12.clone(), gxx + q(3) * h11, q(2) * h12],
        vec![q(0), q(2) * h12, q(2) * h22],
    ]);
    assert_eq!(h, want);

    let lin = AdmissibleSystem::new(&coalesce(&spec("fig4")), &DiffusiveJet::linear(q(-1), q(1))).unwrap();
    let t = hessian_tensors(&lin, 4, &[1, 2, 3, 4, 5]);
    assert!(t.hessian.is_zero_matrix());
    assert!(t.third.iter().all(|x| *x == q(0)));
}

#[test]
fn hessian_against_finite_differences() {
    let net = coalesce(&spec("fig5"));
    let sys = AdmissibleSystem::new(&net, &default_jet().with_mu(&q(2))).unwrap();
    let n = sys.dim();
    let coords: Vec<usize> = (1..=n).collect();
    let v = [0.3, -0.7, 0.5, 1.1, -0.2];
    let eps = 1e-4;
    let grad = |s: f64, cell: usize| {
        let x: Vec<f64> = v.iter().map(|a| s * eps * a).collect();
        let (mut f, mut j) = (vec![0.0; n], vec![0.0; n * n]);
        sys.residual_jacobian(&x, 0.0, &mut f, &mut j);
        (0..n).map(|k| j[cell * n + k] * v[k]).sum::<f64>()
    };
    for cell in 0..n {
        let h = hessian_tensors(&sys, cell + 1, &coords).hessian.map(to_f64);
        let exact: f64 = (0..n).map(|a| (0..n).map(|b| h[(a, b)] * v[a] * v[b]).sum::<f64>()).sum();
        let fd = (grad(1.0, cell) - grad(-1.0, cell)) / (2.0 * eps);
        assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0), "cell {cell}: {exact} vs {fd}");
    }
}

#[test]
fn jet_extraction_roundtrip() {
    let jet = parse_jet(&std::fs::read_to_string(data("fig7.jet")).unwrap(), None).unwrap();
    assert_eq!(extract_jet(&realize_polynomial_system(&jet).unwrap()).unwrap(), jet);
}

#[test]
fn missing_g_x_needs_mu() {
    let text = std::fs::read_to_string(data("default.jet")).unwrap();
    assert_eq!(parse_jet(&text, None).unwrap_err().exit_code(), 2);
    assert_eq!(parse_jet(&text, Some(&q(2))).unwrap().g_x, q(-2));
}

/// `F^N` splits into component evaluations, with the merge cell counting
/// `g` once.
#[test]
fn coalescence_decomposition() {
    let sp = spec("fig1");
    let jet = default_jet();
    let full = AdmissibleSystem::new(&coalesce(&sp), &jet).unwrap();
    let s1 = AdmissibleSystem::new(&sp.canonical_first(), &jet).unwrap();
    let s2 = AdmissibleSystem::new(&sp.canonical_second(), &jet).unwrap();
    let r = realize_polynomial_system(&jet).unwrap();
    let mut rng = StdRng::seed_from_u64(12345);
    let mut next = || qf(rng.gen_range(-1000..=1000), 1000);
    for _ in 0..100 {
        let x: Vec<Q> = (0..3).map(|_| next()).collect();
        let l = next();
        let f = full.evaluate_f_exact(&x, &l);
        let f1 = s1.evaluate_f_exact(&x[..2], &l);
        let f2 = s2.evaluate_f_exact(&x[1..], &l);
        let g = r.g.eval(&[x[1].clone(), l.clone()]);
        assert_eq!(f[0], f1[0]);
        assert_eq!(f[1], &f1[1] + &f2[0] - g);
        assert_eq!(f[2], f2[1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn h_vanishes_on_the_diagonal(n in -1000i64..1000, d in 1i64..1000, ln in -1000i64..1000) {
        let r = realize_polynomial_system(&default_jet()).unwrap();
        let z = qf(n, d);
        prop_assert_eq!(r.h.eval(&[z.clone(), z, qf(ln, 7)]), q(0));
    }

    #[test]
    fn synchrony_and_origin(z in -0.5f64..0.5, l in -0.5f64..0.5) {
        for fig in ["fig2", "fig5", "fig7"] {
            let sys = AdmissibleSystem::new(&coalesce(&spec(fig)), &default_jet()).unwrap();
            let n = sys.dim();
            let r = realize_polynomial_system(sys.jet()).unwrap();
            let g = to_f64(&r.g.eval(&[ffcn::exact::from_f64(z), ffcn::exact::from_f64(l)]));
            for fi in sys.evaluate_f(&vec![z; n], l) {
                prop_assert!((fi - g).abs() <= 1e-12 * g.abs().max(1.0));
            }
            prop_assert!(sys.evaluate_f(&vec![0.0; n], l).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn float_and_exact_evaluation_agree(xs in prop::collection::vec(-100i64..100, 5), l in -100i64..100) {
        let sys = AdmissibleSystem::new(&coalesce(&spec("fig4")), &default_jet()).unwrap();
        let xq: Vec<Q> = xs.iter().map(|&v| qf(v, 100)).collect();
        let xf: Vec<f64> = xq.iter().map(to_f64).collect();
        let e = sys.evaluate_f_exact(&xq, &qf(l, 100));
        let f = sys.evaluate_f(&xf, l as f64 / 100.0);
        for (a, b) in e.iter().zip(&f) {
            prop_assert!((to_f64(a) - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
