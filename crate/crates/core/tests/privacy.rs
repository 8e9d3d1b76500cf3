mod common;

use common::*;

#[test]
fn baseline_shows_no_foreign_intra_cost() {
    for seed in 0..4 {
        let r = privacy_audit(&audit_network(seed), seed, false, false);
        assert!(r.scanned > 0);
        assert_eq!(r.findings, Vec::<String>::new(), "seed {seed}");
    }
}

#[test]
fn cr_discloses_only_the_source_quotes() {
    for seed in 0..4 {
        let net = audit_network(seed);
        assert_eq!(privacy_audit(&net, seed, true, true).findings, Vec::<String>::new(), "seed {seed}");
        // the broadcast tree distances do carry the source domain's quotes
        let strict = privacy_audit(&net, seed, true, false);
        assert!(strict.findings.iter().any(|f| f.ends_with("domain 0")), "seed {seed}");
    }
}
