//! Values pinned against independent reference computations
//! (exhaustive enumeration, constrained optimization, exact rational arithmetic).

use infopriv::multiletter::multiletter_evaluate;
use infopriv::private_info::{common_entropy_upper, wyner_ci_upper_from};
use infopriv::prob::conditional_min_entropy;
use infopriv::rate::{g_eps_deterministic, g_eps_oracle};
use infopriv::{JointDistribution, Kernel, Pmf};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn deterministic_filter_two_by_three() {
    let j = JointDistribution::from_rows(vec![vec![0.4, 0.1, 0.0], vec![0.1, 0.1, 0.3]]).unwrap();
    let p = g_eps_deterministic(&j, 0.05).unwrap();
    // merging the two informative outputs leaves h(0.2) at zero leakage
    close(p.utility, 0.7219280948873623, 1e-12);
    assert!(p.achieved_leakage <= 1e-12);
}

#[test]
fn grid_oracle_two_by_two() {
    let j = JointDistribution::from_rows(vec![vec![0.4, 0.1], vec![0.2, 0.3]]).unwrap();
    let p = g_eps_oracle(&j, 0.1, 20).unwrap();
    assert_eq!(p.filter.z_card(), 3);
    close(p.utility, 0.7813304265189318, 1e-12);
    close(p.achieved_leakage, 0.09980713063823776, 1e-12);
}

#[test]
fn common_information_on_bsc() {
    let k = Kernel::new(vec![vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap();
    let j = JointDistribution::from_channel(&Pmf::uniform(2), &k).unwrap();
    let g = common_entropy_upper(&j, 5, 16);
    let cw = wyner_ci_upper_from(&j, &g, 5, 16);
    // reference minima over |W| in {2, 3, 4}
    close(g.value, 0.9544340029249647, 1e-6);
    close(cw.value, 0.7059049009832656, 1e-6);
    assert!(g.markov_gap <= 1e-6 && cw.markov_gap <= 1e-6);
}

#[test]
fn binning_bsc_sixteen() {
    let k = Kernel::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    let j = JointDistribution::from_channel(&Pmf::uniform(2), &k).unwrap();
    let h = conditional_min_entropy(&k);
    let r = multiletter_evaluate(&j, 16, h / 2.0).unwrap();
    assert_eq!((r.r, r.s), (1, 1));
    close(r.decoder_error_prob, 3.3624887968e-05, 1e-15);
    for tv in &r.per_symbol_tv {
        close(*tv, 0.6293959622296318, 1e-10);
    }
    close(r.bin_masses[0][0], 0.1853020188851841, 1e-12);
    close(r.leakage, 0.0, 1e-12);
    close(r.joint_tv, 0.0, 1e-12);
}

#[test]
fn binning_quaternary_symmetric() {
    let k = Kernel::new(vec![vec![0.3, 0.25, 0.25, 0.2], vec![0.2, 0.25, 0.25, 0.3]]).unwrap();
    let j = JointDistribution::from_channel(&Pmf::uniform(2), &k).unwrap();
    let h = conditional_min_entropy(&k);
    let r = multiletter_evaluate(&j, 6, h / 2.0).unwrap();
    assert_eq!((r.r, r.s), (5, 7));
    close(r.decoder_error_prob, 0.3662825, 1e-12);
    for tv in &r.per_symbol_tv {
        close(*tv, 0.47651, 1e-12);
    }
    close(*r.bin_masses[1].last().unwrap(), 0.269505, 1e-12);
    close(r.leakage, 0.0, 1e-12);
}

#[test]
fn binning_quaternary_asymmetric() {
    let k = Kernel::new(vec![vec![0.3, 0.25, 0.25, 0.2], vec![0.25, 0.2, 0.3, 0.25]]).unwrap();
    let j = JointDistribution::from_channel(&Pmf::new(vec![0.4, 0.6]).unwrap(), &k).unwrap();
    let h = conditional_min_entropy(&k);
    let r = multiletter_evaluate(&j, 5, h / 2.0).unwrap();
    assert_eq!((r.r, r.s), (4, 6));
    close(r.leakage, 0.000538147864502678, 1e-12);
    close(r.joint_tv, 0.023025, 1e-12);
    close(r.decoder_error_prob, 0.406873125, 1e-12);
    for tv in &r.per_symbol_tv {
        close(*tv, 0.45164, 1e-12);
    }
    assert!(r.joint_tv <= r.jensen_bound);
}
