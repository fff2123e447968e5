mod common;

use std::collections::BTreeMap;

use common::*;
use nalgebra::{DMatrix, DVector};

use techmix::cluster::{dominant_technology, trajectories_from_panel, ClusterAssignment};
use techmix::panel::{build_design, drop_incomplete, DesignOptions, Focal};
use techmix::synth::generate_panel;

#[test]
fn planted_clusters_follow_the_configuration() {
    let cfg = four_cluster_synth(12, 25, 2014, 2023);
    let p = generate_panel(&cfg).unwrap();
    let mut sizes = vec![0; cfg.clusters.len()];
    p.truth.firm_clusters.values().for_each(|&c| sizes[c] += 1);
    assert_eq!(sizes, vec![25; 4]);
    assert_eq!(p.dataset.len(), cfg.n_firms * cfg.n_years());

    for row in &p.dataset.rows {
        let spec = &cfg.clusters[p.truth.firm_clusters[&row.firm_id]];
        let shares = row.derived.as_ref().unwrap().tech_shares.unwrap();
        let lead = shares[spec.tech.index()];
        assert!(lead >= spec.leading_share.0 - 1e-12 && lead <= spec.leading_share.1 + 1e-12, "{lead}");
    }
}

#[test]
fn planted_technologies_dominate_their_clusters() {
    let cfg = four_cluster_synth(13, 10, 2014, 2023);
    let p = generate_panel(&cfg).unwrap();
    let trajectories = trajectories_from_panel(&p.dataset);
    let labels: Vec<usize> = trajectories.iter().map(|t| p.truth.firm_clusters[&t.firm_id]).collect();
    let dominant = dominant_technology(&labels, 4, &trajectories).unwrap();
    let techs: Vec<_> = dominant.iter().map(|d| d.tech).collect();
    assert_eq!(techs, p.truth.cluster_techs);
}

#[test]
fn least_squares_recovers_the_planted_coefficients() {
    let mut cfg = four_cluster_synth(14, 100, 2014, 2023);
    cfg.beta = BTreeMap::from([("renewable_share".to_string(), 0.02), ("leverage".to_string(), -0.03)]);
    cfg.noise_sd = 0.005;
    let p = generate_panel(&cfg).unwrap();

    let trajectories = trajectories_from_panel(&p.dataset);
    let labels: Vec<usize> = trajectories.iter().map(|t| p.truth.firm_clusters[&t.firm_id]).collect();
    let clusters = ClusterAssignment {
        firm_ids: trajectories.iter().map(|t| t.firm_id.clone()).collect(),
        dominant: dominant_technology(&labels, 4, &trajectories).unwrap(),
        labels,
        k: 4,
        medoids: vec![],
    };
    let mut opts = DesignOptions::new(Focal::Renewable);
    opts.include_interactions = false;
    let (rows, _) = drop_incomplete(&p.dataset, &opts.required_variables()).unwrap();
    let d = build_design(&rows, &clusters, &opts).unwrap();

    let x = DMatrix::from_fn(d.n_obs, d.n_vars(), |i, j| d.x[j][i]);
    let y = DVector::from_column_slice(&d.y);
    let beta = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    let coef = |name: &str| beta[d.index_of(name).unwrap()];
    assert!((coef("renewable_share") - 0.02).abs() < 0.005, "{}", coef("renewable_share"));
    assert!((coef("leverage") + 0.03).abs() < 0.005, "{}", coef("leverage"));
    assert!(coef("sales_growth").abs() < 0.005, "{}", coef("sales_growth"));
}
