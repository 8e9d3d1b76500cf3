//! Benchmark runs producing one CSV row per topology and mode.

use crate::crypto::{Backend, CryptoParams};
use crate::fastpath::{build_shared_trees, run_cr, TournamentMode};
use crate::pathsetup::RoutingMode;
use crate::pspt::{reveal_tree, run_pspt};
use crate::runtime::{spawn_network, CsvRow, Metrics};
use crate::topology::{EcgSkeleton, MultiDomainNetwork, SwitchId};
use crate::Error;
use std::time::{Duration, Instant};

pub fn mode_name(mode: RoutingMode) -> &'static str {
    match mode {
        RoutingMode::Baseline => "baseline",
        RoutingMode::Cr => "cr",
        RoutingMode::Shared => "shared",
    }
}

pub fn backend_name(backend: Backend) -> &'static str {
    match backend {
        Backend::Real => "real",
        Backend::Transparent => "transparent",
    }
}

/// Source used when a benchmark does not name one: the first switch of the
/// first domain.
pub fn default_source(_net: &MultiDomainNetwork) -> SwitchId {
    SwitchId::new(0, 0)
}

/// Builds the tree(s) for `source` on a fresh cluster and reports traffic
/// and work counters. Key generation is excluded from the wall time.
pub fn measure(
    topo_id: &str,
    net: &MultiDomainNetwork,
    mode: RoutingMode,
    params: &CryptoParams,
    source: SwitchId,
    seed: u64,
) -> Result<CsvRow, Error> {
    let mut cluster = spawn_network(net.clone(), params, seed)?;
    let started = Instant::now();
    match mode {
        RoutingMode::Shared => {
            build_shared_trees(&mut cluster, source.domain, TournamentMode::HoldersOnly)?;
        }
        RoutingMode::Baseline | RoutingMode::Cr => {
            let skeleton = EcgSkeleton::build(net, Some(source), &[])?;
            let session = cluster.start_session(source.domain, skeleton)?;
            if mode == RoutingMode::Baseline {
                let res = run_pspt(&mut cluster, session)?;
                reveal_tree(&mut cluster, &res)?;
            } else {
                run_cr(&mut cluster, session, TournamentMode::HoldersOnly)?;
            }
        }
    }
    let wall = started.elapsed();
    Ok(csv_row(topo_id, net, mode, params.backend, &cluster.metrics_snapshot(), wall))
}

/// CSV row for a run that produced `metrics` in `wall` time.
pub fn csv_row(
    topo_id: &str,
    net: &MultiDomainNetwork,
    mode: RoutingMode,
    backend: Backend,
    metrics: &Metrics,
    wall: Duration,
) -> CsvRow {
    CsvRow {
        topo_id: topo_id.to_string(),
        mode: mode_name(mode).to_string(),
        backend: backend_name(backend).to_string(),
        n_domains: net.domains.len(),
        n_inter_links: net.inter_links.len(),
        n_gateways: net.gateways().len(),
        wall_ms: wall.as_secs_f64() * 1000.0,
        bytes_per_domain_avg: metrics.bytes_per_domain_avg(),
        secif_count: metrics.secif_count,
        cmp_count: metrics.cmp_count,
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), 0.0);
    }

    #[test]
    fn measure_toy1() {
        let net = MultiDomainNetwork::builtin("toy1").unwrap();
        let s = net.resolve("D1:s").unwrap();
        let row = measure("toy1", &net, RoutingMode::Baseline, &CryptoParams::transparent(), s, 1).unwrap();
        assert_eq!((row.n_domains, row.n_inter_links, row.n_gateways), (2, 1, 2));
        assert!(row.secif_count > 0);
        assert!(row.bytes_per_domain_avg > 0.0);
    }
}
