mod common;

use common::*;
use xroute::fastpath::{build_shared_trees, run_cr, TournamentMode};
use xroute::pspt::{revealed, reveal_tree, run_pspt};
use xroute::runtime::Cluster;
use xroute::topology::EdgeKind;
use xroute::wire::Encode;
use xroute::{spawn_network, CryptoParams, EcgSkeleton, EquivalentCostGraph, MultiDomainNetwork, SwitchId};

fn cluster(net: &MultiDomainNetwork, seed: u64) -> Cluster {
    spawn_network(net.clone(), &CryptoParams::transparent(), seed).unwrap()
}

#[test]
fn baseline_distances_match_dijkstra() {
    for seed in 0..20 {
        let net = small_network(seed);
        let (s, _) = endpoints(&net);
        let ecg = EquivalentCostGraph::per_flow(&net, s).unwrap();
        let mut c = cluster(&net, seed);
        let session = c.start_session(s.domain, ecg.skeleton.clone()).unwrap();
        let res = run_pspt(&mut c, session).unwrap();
        reveal_tree(&mut c, &res).unwrap();
        let tree = revealed(&c, session).unwrap();
        let want = ecg_distances(&ecg);
        for (p, node) in ecg.nodes().iter().enumerate() {
            assert_eq!(tree.dist(*node), want[p], "seed {seed} node {node}");
            // parent pointers add up to the distance
            if let Some(parent) = tree.parent(*node) {
                let e = ecg.skeleton.edge_between(p, ecg.skeleton.position(parent).unwrap()).unwrap();
                assert_eq!(tree.dist(parent).unwrap() + ecg.costs[e], want[p].unwrap());
            }
        }
    }
}

#[test]
fn baseline_secure_if_counts() {
    for seed in [1, 4, 7] {
        let net = small_network(seed);
        let (s, _) = endpoints(&net);
        let sk = EcgSkeleton::build(&net, Some(s), &[]).unwrap();
        let (n, m) = (sk.nodes.len() as u64, sk.edges.len() as u64);
        let mut c = cluster(&net, seed);
        let session = c.start_session(s.domain, sk).unwrap();
        run_pspt(&mut c, session).unwrap();
        let metrics = c.metrics_snapshot();
        let per_iteration = if m >= 2 { 3 * m + m * (m - 1) / 2 } else { m };
        assert_eq!(metrics.secif_count, (n - 1) * per_iteration, "seed {seed}");
        let sc_per_iteration = if m >= 2 { m * (m - 1) + m } else { 0 };
        assert_eq!(metrics.cmp_count, (n - 1) * sc_per_iteration, "seed {seed}");
        assert_eq!(metrics.rounds, n - 1);
    }
}

#[test]
fn cr_matches_baseline_and_dijkstra() {
    for seed in 0..12 {
        let net = small_network(seed);
        let (s, _) = endpoints(&net);
        let ecg = EquivalentCostGraph::per_flow(&net, s).unwrap();
        let mut c = cluster(&net, seed);
        let base = c.start_session(s.domain, ecg.skeleton.clone()).unwrap();
        let res = run_pspt(&mut c, base).unwrap();
        reveal_tree(&mut c, &res).unwrap();
        let baseline = revealed(&c, base).unwrap();
        let cr = c.start_session(s.domain, ecg.skeleton.clone()).unwrap();
        let tree = run_cr(&mut c, cr, TournamentMode::HoldersOnly).unwrap();
        let want = ecg_distances(&ecg);
        for (p, node) in ecg.nodes().iter().enumerate() {
            assert_eq!(tree.dist(p), want[p], "seed {seed}");
            assert_eq!(baseline.dist(*node), want[p], "seed {seed}");
        }
    }
}

#[test]
fn cr_on_larger_networks() {
    for seed in 0..10 {
        let net = medium_network(seed);
        let (s, _) = endpoints(&net);
        let ecg = EquivalentCostGraph::per_flow(&net, s).unwrap();
        assert!(ecg.nodes().len() <= 40);
        let mut c = cluster(&net, seed);
        let session = c.start_session(s.domain, ecg.skeleton.clone()).unwrap();
        let tree = run_cr(&mut c, session, TournamentMode::HoldersOnly).unwrap();
        let oracle = ecg_tree(&ecg);
        for p in 0..ecg.nodes().len() {
            assert_eq!(tree.dist(p), oracle[p].map(|e| e.0), "seed {seed}");
            assert_eq!(tree.parent(p), oracle[p].and_then(|e| e.1), "seed {seed}");
        }
        let bytes = tree.to_bytes();
        for ctrl in c.controllers() {
            assert_eq!(ctrl.tree(session).unwrap().to_bytes(), bytes, "replica {}", ctrl.id());
        }
    }
}

#[test]
fn tournament_size_follows_holders() {
    let net = medium_network(3);
    let (s, _) = endpoints(&net);
    let sk = EcgSkeleton::build(&net, Some(s), &[]).unwrap();
    let n_nodes = sk.nodes.len() as u64;
    let n = net.domains.len() as u64;
    let mut c = cluster(&net, 3);
    let session = c.start_session(s.domain, sk.clone()).unwrap();
    run_cr(&mut c, session, TournamentMode::AllDomains).unwrap();
    assert_eq!(c.metrics_snapshot().cmp_count, (n_nodes - 1) * (n - 1));

    let session = c.start_session(s.domain, sk).unwrap();
    let before = c.metrics_snapshot().cmp_count;
    run_cr(&mut c, session, TournamentMode::HoldersOnly).unwrap();
    let holders_only = c.metrics_snapshot().cmp_count - before;
    assert!(holders_only <= (n_nodes - 1) * (n - 1));
}

#[test]
fn only_source_domain_holds_candidates() {
    // g1 is interior, so the graph is s, g2 and h
    let net = MultiDomainNetwork::parse(
        "cmax 20\ndomain A\nswitch s\nswitch g1\nswitch g2\nlink s g1 cost 1\nlink g1 g2 cost 1\n\
         domain B\nswitch h\ninterlink A:g2 B:h cost 1\n",
    )
    .unwrap();
    let s = net.resolve("A:s").unwrap();
    let mut c = cluster(&net, 0);
    let sk = EcgSkeleton::build(&net, Some(s), &[]).unwrap();
    let session = c.start_session(0, sk).unwrap();
    let tree = run_cr(&mut c, session, TournamentMode::HoldersOnly).unwrap();
    assert_eq!((0..3).map(|p| tree.dist(p).unwrap()).collect::<Vec<_>>(), vec![0, 2, 3]);
    assert_eq!(c.metrics_snapshot().cmp_count, 0);
}

#[test]
fn disconnected_graph_aborts_cr() {
    let net = MultiDomainNetwork::parse(
        "cmax 20\ndomain A\nswitch s\nswitch g\n\
         domain B\nswitch h\ninterlink A:g B:h cost 1\n",
    )
    .unwrap();
    let s = net.resolve("A:s").unwrap();
    let mut c = cluster(&net, 0);
    let sk = EcgSkeleton::build(&net, Some(s), &[]).unwrap();
    let session = c.start_session(0, sk.clone()).unwrap();
    // s and g quote c_max without a path; remove that edge to disconnect
    let cut = sk.retain_edges(|e| matches!(sk.edges[e].kind, EdgeKind::Inter { .. }));
    let session2 = c.start_session(0, cut).unwrap();
    assert!(run_cr(&mut c, session2, TournamentMode::HoldersOnly).is_err());
    assert!(run_cr(&mut c, session, TournamentMode::HoldersOnly).is_ok());
}

#[test]
fn fig2_shared_trees_rooted_at_both_gateways() {
    let net = MultiDomainNetwork::builtin("fig2").unwrap();
    let mut c = cluster(&net, 2);
    let trees = build_shared_trees(&mut c, 0, TournamentMode::HoldersOnly).unwrap();
    let roots: Vec<SwitchId> = trees.sessions.iter().map(|t| t.0).collect();
    assert_eq!(roots, vec![net.resolve("Ds:v1").unwrap(), net.resolve("Ds:v2").unwrap()]);
    for &(root, session) in &trees.sessions {
        let ecg = EquivalentCostGraph::from_skeleton(&net, EcgSkeleton::build(&net, Some(root), &[]).unwrap());
        let want = ecg_distances(&ecg);
        let tree = c.controller(0).tree(session).unwrap();
        for p in 0..ecg.nodes().len() {
            assert_eq!(tree.dist(p), want[p]);
        }
    }
}

#[test]
fn refused_pair_quotes_cmax_in_every_shared_tree() {
    let mut net = MultiDomainNetwork::builtin("fig2").unwrap();
    let d1 = net.domain_index("D1").unwrap();
    net.domains[d1].policy.insert((0, 1), xroute::topology::PolicyOverride::Refuse);
    for g in net.domain_gateways(0) {
        let ecg = EquivalentCostGraph::from_skeleton(&net, EcgSkeleton::build(&net, Some(g), &[]).unwrap());
        let (v3, v4) = (net.resolve("D1:v3").unwrap(), net.resolve("D1:v4").unwrap());
        let e = ecg.skeleton.edge_between(ecg.skeleton.position(v3).unwrap(), ecg.skeleton.position(v4).unwrap()).unwrap();
        assert_eq!(ecg.costs[e], net.c_max);
    }
}
