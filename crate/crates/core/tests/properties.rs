use proptest::prelude::*;

use demon_ledger::channels::random_instrument;
use demon_ledger::laws::evaluate;
use demon_ledger::operator::{Operator, SystemLabel};
use demon_ledger::qinfo::{conditional_mutual_information, mutual_information, relative_entropy, von_neumann_entropy};
use demon_ledger::random::{random_density_matrix, random_hermitian, rng_from_seed};
use demon_ledger::scenarios::{random_protocol, PointerClass, SampleConfig};
use demon_ledger::thermo::{eq_free_energy, noneq_free_energy};

fn state(names: &[(&str, usize)], rank: usize, seed: u64) -> Operator {
    let mut rng = rng_from_seed(seed);
    let f: Vec<SystemLabel> = names.iter().map(|(n, d)| SystemLabel::new(*n, *d)).collect();
    let d: usize = names.iter().map(|x| x.1).product();
    Operator::new(f, random_density_matrix(d, rank.clamp(1, d), &mut rng)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_bounded_by_dimension(d in 2usize..6, rank in 1usize..6, seed in any::<u64>()) {
        let rho = state(&[("A", d)], rank, seed);
        let s = von_neumann_entropy(&rho);
        prop_assert!(s >= -1e-12 && s <= (d as f64).ln() + 1e-12);
    }

    #[test]
    fn strong_subadditivity(da in 2usize..4, db in 2usize..4, dc in 2usize..4, rank in 1usize..8, seed in any::<u64>()) {
        let rho = state(&[("A", da), ("B", db), ("C", dc)], rank, seed);
        prop_assert!(mutual_information(&rho, &["A"], &["B", "C"]).unwrap() >= -1e-10);
        prop_assert!(conditional_mutual_information(&rho, &["A"], &["B"], &["C"]).unwrap() >= -1e-10);
    }

    #[test]
    fn klein_inequality(d in 2usize..5, seed in any::<u64>()) {
        let rho = state(&[("A", d)], d, seed);
        let sigma = state(&[("A", d)], d, seed ^ 0x9e37);
        prop_assert!(relative_entropy(&rho, &sigma).unwrap() >= -1e-10);
    }

    #[test]
    fn gibbs_minimizes_free_energy(d in 2usize..5, rank in 1usize..5, beta in 0.1f64..5.0, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let a = SystemLabel::new("A", d);
        let h = Operator::new(vec![a.clone()], random_hermitian(d, &mut rng)).unwrap();
        let rho = Operator::new(vec![a], random_density_matrix(d, rank.min(d), &mut rng)).unwrap();
        prop_assert!(noneq_free_energy(&rho, &h, beta).unwrap() >= eq_free_energy(&h, beta).unwrap() - 1e-10);
    }

    #[test]
    fn instruments_are_trace_preserving(d in 2usize..5, outcomes in 1usize..5, env in 1usize..3, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let ins = random_instrument(SystemLabel::new("M", d), outcomes, env, &mut rng).unwrap();
        prop_assert!(ins.trace_preservation_residual() < 1e-10);
    }

    #[test]
    fn ledger_identities_on_any_seed(seed in any::<u64>(), class in 0usize..4) {
        let cfg = SampleConfig { pointer_class: PointerClass::ALL[class], ..Default::default() };
        let spec = random_protocol(&cfg, seed).unwrap();
        let r = evaluate(&spec).unwrap();
        prop_assert!(r.extracted_work_identity.passed());
        prop_assert!(r.injected_work_identity.passed());
        prop_assert!(r.work.totals_residual() < 1e-9);
        prop_assert!(r.cmi_go_identity_residual < 1e-9);
        for x in [r.info.holevo_ak, r.info.cmi_am_k, r.info.s_irr_b1, r.info.s_irr_b2, r.info.i_a_mk_4, r.info.h_outcomes] {
            prop_assert!(x >= -1e-9);
        }
        prop_assert_eq!(r.measurement.forms_agree, true);
    }
}
