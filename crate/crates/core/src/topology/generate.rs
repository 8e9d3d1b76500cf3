use super::{Domain, InterLink, IntraLink, MultiDomainNetwork, Switch, SwitchId, TopologyError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeSet;

/// Size of one generated domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainShape {
    pub name: String,
    pub switches: usize,
    pub links: usize,
    /// Border routers eligible to terminate inter-domain links.
    pub gateways: usize,
}

impl DomainShape {
    pub fn new(name: impl Into<String>, switches: usize, links: usize, gateways: usize) -> Self {
        Self { name: name.into(), switches, links, gateways }
    }
}

/// Router, link and border-router counts of seven ISP router-level maps
/// (AS 1221, 1239, 1755, 2914, 3257, 3967, 7018), labelled I to VII.
pub const TABLE1: [(&str, usize, usize, usize); 7] = [
    ("I", 318, 758, 231),
    ("II", 604, 2268, 242),
    ("III", 172, 381, 61),
    ("IV", 960, 2821, 507),
    ("V", 240, 404, 89),
    ("VI", 201, 434, 110),
    ("VII", 631, 2078, 246),
];

/// Domain groups of the 30 multi-domain benchmark topologies, five
/// topologies per group.
const TABLE2_GROUPS: [&[usize]; 6] = [
    &[0, 1],
    &[0, 1, 2],
    &[3, 4, 5, 6],
    &[0, 2, 4, 5, 6],
    &[0, 1, 2, 3, 4, 5],
    &[0, 1, 2, 3, 4, 5, 6],
];

/// Inter-domain link counts of the five topologies in each group.
pub const SWEEP_INTER_LINKS: [usize; 5] = [10, 25, 50, 75, 100];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub domains: Vec<DomainShape>,
    pub n_inter_links: usize,
    pub cost_range: (u64, u64),
    pub inter_cost_range: (u64, u64),
    pub capacity_range: Option<(u64, u64)>,
    pub c_max: u64,
}

impl SyntheticConfig {
    /// `n_domains` identical domains with about 1.5 links per switch, every
    /// switch a border candidate.
    pub fn uniform(n_domains: usize, switches_per_domain: usize, n_inter_links: usize) -> Self {
        let s = switches_per_domain;
        let links = if s < 2 { 0 } else { (s * 3 / 2).clamp(s - 1, s * (s - 1) / 2) };
        Self {
            domains: (1..=n_domains).map(|i| DomainShape::new(format!("D{i}"), s, links, s)).collect(),
            n_inter_links,
            cost_range: (1, 9),
            inter_cost_range: (1, 9),
            capacity_range: Some((1, 5)),
            c_max: 1000,
        }
    }
}

pub fn generate_synthetic(
    n_domains: usize,
    switches_per_domain: usize,
    n_inter_links: usize,
    seed: u64,
) -> Result<MultiDomainNetwork, TopologyError> {
    generate(&SyntheticConfig::uniform(n_domains, switches_per_domain, n_inter_links), seed)
}

fn draw<R: Rng>(rng: &mut R, range: (u64, u64)) -> u64 {
    rng.gen_range(range.0..=range.1)
}

/// Random connected network: each domain is a random spanning tree plus
/// random extra links; inter-domain links first join the domains into a
/// tree, then connect random border-router pairs.
pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Result<MultiDomainNetwork, TopologyError> {
    let bad = |m: String| Err(TopologyError::Infeasible(m));
    if cfg.domains.is_empty() {
        return bad("at least one domain is required".into());
    }
    if cfg.cost_range.0 < 1
        || cfg.cost_range.0 > cfg.cost_range.1
        || cfg.inter_cost_range.0 < 1
        || cfg.inter_cost_range.0 > cfg.inter_cost_range.1
        || cfg.cost_range.1.max(cfg.inter_cost_range.1) > cfg.c_max
    {
        return bad("cost ranges must lie in [1, cmax]".into());
    }
    if cfg.capacity_range.is_some_and(|(lo, hi)| lo < 1 || lo > hi) {
        return bad("capacity range must start at 1 or more".into());
    }
    for d in &cfg.domains {
        let max_links = d.switches * d.switches.saturating_sub(1) / 2;
        if d.switches == 0 || d.links + 1 < d.switches || d.links > max_links {
            return bad(format!("domain {} cannot have {} switches and {} links", d.name, d.switches, d.links));
        }
        if d.gateways > d.switches {
            return bad(format!("domain {} has more border routers than switches", d.name));
        }
        if cfg.domains.len() > 1 && d.gateways == 0 {
            return bad(format!("domain {} has no border routers", d.name));
        }
    }
    let n = cfg.domains.len();
    if cfg.n_inter_links + 1 < n {
        return bad(format!("{n} domains need at least {} inter-domain links", n - 1));
    }
    let possible: usize = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| cfg.domains[i].gateways * cfg.domains[j].gateways)
        .sum();
    if cfg.n_inter_links > possible {
        return bad(format!("only {possible} distinct inter-domain links are possible"));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut domains = Vec::with_capacity(n);
    let mut borders: Vec<Vec<usize>> = Vec::with_capacity(n);
    for shape in &cfg.domains {
        let s = shape.switches;
        let mut order: Vec<usize> = (0..s).collect();
        order.shuffle(&mut rng);
        let mut pairs = BTreeSet::new();
        let mut links = Vec::with_capacity(shape.links);
        let push = |a: usize, b: usize, rng: &mut ChaCha20Rng, links: &mut Vec<IntraLink>| {
            links.push(IntraLink {
                a,
                b,
                cost: draw(rng, cfg.cost_range),
                capacity: cfg.capacity_range.map(|r| draw(rng, r)),
            });
        };
        for i in 1..s {
            let j = rng.gen_range(0..i);
            let (a, b) = (order[i], order[j]);
            pairs.insert((a.min(b), a.max(b)));
            push(a, b, &mut rng, &mut links);
        }
        while links.len() < shape.links {
            let a = rng.gen_range(0..s);
            let b = rng.gen_range(0..s);
            if a != b && pairs.insert((a.min(b), a.max(b))) {
                push(a, b, &mut rng, &mut links);
            }
        }
        let mut candidates: Vec<usize> = (0..s).collect();
        candidates.shuffle(&mut rng);
        candidates.truncate(shape.gateways);
        candidates.sort_unstable();
        let switches = (0..s)
            .map(|i| Switch { name: format!("s{i}"), border: candidates.binary_search(&i).is_ok() })
            .collect();
        domains.push(Domain { name: shape.name.clone(), switches, links, ..Domain::default() });
        borders.push(candidates);
    }

    let mut inter_links = Vec::with_capacity(cfg.n_inter_links);
    let mut used = BTreeSet::new();
    let mut add = |a: SwitchId, b: SwitchId, rng: &mut ChaCha20Rng, out: &mut Vec<InterLink>| -> bool {
        if !used.insert((a.min(b), a.max(b))) {
            return false;
        }
        out.push(InterLink {
            a: a.min(b),
            b: a.max(b),
            cost: draw(rng, cfg.inter_cost_range),
            capacity: cfg.capacity_range.map(|r| draw(rng, r)),
        });
        true
    };
    let pick = |d: usize, rng: &mut ChaCha20Rng| SwitchId::new(d, *borders[d].choose(rng).unwrap());
    let mut dom_order: Vec<usize> = (0..n).collect();
    dom_order.shuffle(&mut rng);
    for i in 1..n {
        let (x, y) = (dom_order[i], dom_order[rng.gen_range(0..i)]);
        loop {
            let (a, b) = (pick(x, &mut rng), pick(y, &mut rng));
            if add(a, b, &mut rng, &mut inter_links) {
                break;
            }
        }
    }
    while inter_links.len() < cfg.n_inter_links {
        let x = rng.gen_range(0..n);
        let y = rng.gen_range(0..n);
        if x == y {
            continue;
        }
        let (a, b) = (pick(x, &mut rng), pick(y, &mut rng));
        add(a, b, &mut rng, &mut inter_links);
    }
    inter_links.sort_by_key(|l| (l.a, l.b));

    Ok(MultiDomainNetwork { c_max: cfg.c_max, domains, inter_links })
}

fn table1_shape(i: usize) -> DomainShape {
    let (name, s, l, g) = TABLE1[i];
    DomainShape::new(name, s, l, g)
}

/// Named generator presets.
///
/// * `table1-I` … `table1-VII`: one domain with the router, link and border
///   router counts of the corresponding map.
/// * `table2-1` … `table2-30`: the multi-domain benchmark topologies; every
///   group of five shares its domains and sweeps the inter-link count.
pub fn preset(name: &str, seed: u64) -> Result<MultiDomainNetwork, TopologyError> {
    let unknown = || TopologyError::Infeasible(format!("unknown preset `{name}`"));
    if let Some(roman) = name.strip_prefix("table1-") {
        let i = TABLE1.iter().position(|t| t.0 == roman).ok_or_else(unknown)?;
        let cfg = SyntheticConfig { domains: vec![table1_shape(i)], n_inter_links: 0, ..SyntheticConfig::uniform(1, 2, 0) };
        return generate(&cfg, seed);
    }
    if let Some(id) = name.strip_prefix("table2-") {
        let id: usize = id.parse().map_err(|_| unknown())?;
        if !(1..=30).contains(&id) {
            return Err(unknown());
        }
        let group = (id - 1) / 5;
        return generate(&table2_config(group, SWEEP_INTER_LINKS[(id - 1) % 5]), seed);
    }
    Err(unknown())
}

fn table2_config(group: usize, n_inter_links: usize) -> SyntheticConfig {
    SyntheticConfig {
        domains: TABLE2_GROUPS[group].iter().map(|&i| table1_shape(i)).collect(),
        n_inter_links,
        ..SyntheticConfig::uniform(1, 2, 0)
    }
}

/// The five topologies of benchmark group `group` (1-based), as
/// `(topology id, network)`.
pub fn sweep(group: usize, seed: u64) -> Result<Vec<(String, MultiDomainNetwork)>, TopologyError> {
    if !(1..=TABLE2_GROUPS.len()).contains(&group) {
        return Err(TopologyError::Infeasible(format!("unknown benchmark group {group}")));
    }
    SWEEP_INTER_LINKS
        .iter()
        .enumerate()
        .map(|(k, &links)| {
            let id = (group - 1) * 5 + k + 1;
            Ok((format!("table2-{id}"), generate(&table2_config(group - 1, links), seed)?))
        })
        .collect()
}
