use incent_core::criteria::{control_criterion, response_criterion};
use incent_core::fairness::{exists_fair_optimal_policy, fair_optimal_by_enumeration};
use incent_core::policy::{all_policies, expected_utility, optimal_policy_set};
use incent_core::random::{random_cid, random_scim, rng, ScimShape};
use incent_core::semantics::{
    control_by_enumeration, has_control_incentive, has_response_incentive, response_by_enumeration,
};
use incent_core::witness::{build_control_witness, build_response_witness};
use incent_core::{NodeKind, Rational};

const CAP: usize = 4096;

#[test]
fn structural_verdicts_match_enumeration() {
    let mut checked = 0;
    for seed in 0..60 {
        let g = random_cid(&mut rng(seed), 5);
        let m = random_scim(&mut rng(seed + 1000), &g, ScimShape::default());
        for x in g.node_ids().filter(|&x| g.kind(x) != NodeKind::Decision) {
            let c = has_control_incentive(&m, x, CAP).unwrap();
            if let Ok(b) = control_by_enumeration(&m, x, CAP) {
                assert_eq!(c.status.present(), Some(b), "control seed {seed} node {}", g.name(x));
                checked += 1;
            }
            let r = has_response_incentive(&m, x, CAP).unwrap();
            if let Ok(b) = response_by_enumeration(&m, x, CAP, false) {
                assert_eq!(r.status.present(), Some(b), "response seed {seed} node {}", g.name(x));
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn criteria_sound_and_witnessed() {
    for seed in 0..40 {
        let g = random_cid(&mut rng(seed), 6);
        let m = random_scim(&mut rng(seed + 7), &g, ScimShape::default());
        for x in g.node_ids().filter(|&x| g.kind(x) != NodeKind::Decision) {
            if control_criterion(&g, x).unwrap().compatible {
                let w = build_control_witness::<Rational>(&g, x).unwrap();
                assert_eq!(has_control_incentive(&w.model, x, CAP).unwrap().status.present(), Some(true));
            } else {
                assert_eq!(has_control_incentive(&m, x, CAP).unwrap().status.present(), Some(false));
            }
            if response_criterion(&g, x).unwrap().compatible {
                let w = build_response_witness::<Rational>(&g, x).unwrap();
                assert_eq!(has_response_incentive(&w.model, x, CAP).unwrap().status.present(), Some(true));
            } else {
                assert_eq!(has_response_incentive(&m, x, CAP).unwrap().status.present(), Some(false));
            }
        }
    }
}

#[test]
fn fair_optimal_policy_iff_no_response_incentive() {
    let shape = ScimShape {
        max_domain: 2,
        max_exo: 2,
        max_decision_exo: 2,
        max_denominator: 4,
    };
    let mut done = 0;
    let mut seed = 0;
    while done < 40 {
        seed += 1;
        let g = random_cid(&mut rng(seed), 5);
        let m = random_scim(&mut rng(seed + 99), &g, shape);
        let set = optimal_policy_set(&m).unwrap();
        for a in g.node_ids().filter(|&x| g.kind(x) != NodeKind::Decision) {
            let Ok(found) = fair_optimal_by_enumeration(&m, &set, a, CAP) else {
                continue;
            };
            let mf = exists_fair_optimal_policy(&m, a, CAP).unwrap();
            assert_eq!(mf.exists, Some(found.is_some()), "seed {seed} attribute {}", g.name(a));
            if mf.exists == Some(true) {
                assert_eq!(mf.minimal_element_ok, Some(true), "seed {seed} attribute {}", g.name(a));
            }
            done += 1;
        }
    }
}

#[test]
fn optimal_set_matches_brute_force() {
    for seed in 0..60 {
        let g = random_cid(&mut rng(seed), 5);
        let m = random_scim(&mut rng(seed + 5), &g, ScimShape::default());
        let Ok(all) = all_policies(&m, CAP) else { continue };
        let set = optimal_policy_set(&m).unwrap();
        let values: Vec<Rational> = all.iter().map(|p| expected_utility(&m, p).unwrap()).collect();
        let best = values.iter().max().unwrap().clone();
        assert_eq!(set.value, best);
        for (p, v) in all.iter().zip(&values) {
            assert_eq!(set.contains(p), *v == best, "seed {seed}");
        }
    }
}
