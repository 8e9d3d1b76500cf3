use super::{Domain, InterLink, IntraLink, MultiDomainNetwork, PolicyOverride, Switch, SwitchId, TopologyError};
use std::collections::BTreeSet;
use std::fmt::Write as _;

fn perr(line: usize, message: impl Into<String>) -> TopologyError {
    TopologyError::Parse { line, message: message.into() }
}

fn invalid(line: usize, message: impl std::fmt::Display) -> TopologyError {
    TopologyError::Invalid(format!("line {line}: {message}"))
}

fn int(tok: Option<&str>, line: usize, what: &str) -> Result<u64, TopologyError> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse::<u64>().map_err(|_| perr(line, format!("{what} `{tok}` is not a non-negative integer")))
}

/// Parses `cost <int> [cap <int>]`.
fn cost_cap<'a>(
    mut toks: impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<(u64, Option<u64>), TopologyError> {
    match toks.next() {
        Some("cost") => {}
        Some(t) => return Err(perr(line, format!("expected `cost`, found `{t}`"))),
        None => return Err(perr(line, "missing `cost`")),
    }
    let cost = int(toks.next(), line, "cost")?;
    let cap = match toks.next() {
        None => None,
        Some("cap") => Some(int(toks.next(), line, "capacity")?),
        Some(t) => return Err(perr(line, format!("unexpected `{t}`"))),
    };
    if let Some(t) = toks.next() {
        return Err(perr(line, format!("unexpected `{t}`")));
    }
    Ok((cost, cap))
}

struct Pending {
    line: usize,
    cost: u64,
    cap: Option<u64>,
}

pub(super) fn parse(text: &str) -> Result<MultiDomainNetwork, TopologyError> {
    let mut c_max: Option<(usize, u64)> = None;
    let mut domains: Vec<Domain> = Vec::new();
    let mut costs: Vec<Pending> = Vec::new();
    let mut inter: Vec<(usize, String, String, String, String, u64, Option<u64>)> = Vec::new();
    let mut policies: Vec<(usize, String, String, String, Option<u64>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        let Some(kw) = toks.next() else { continue };
        match kw {
            "cmax" => {
                if c_max.is_some() {
                    return Err(invalid(line, "cmax declared twice"));
                }
                let v = int(toks.next(), line, "cmax")?;
                if v == 0 {
                    return Err(invalid(line, "cmax must be at least 1"));
                }
                if let Some(t) = toks.next() {
                    return Err(perr(line, format!("unexpected `{t}`")));
                }
                c_max = Some((line, v));
            }
            "domain" => {
                let name = toks.next().ok_or_else(|| perr(line, "missing domain id"))?;
                if name.contains(':') {
                    return Err(perr(line, "domain ids may not contain `:`"));
                }
                if let Some(t) = toks.next() {
                    return Err(perr(line, format!("unexpected `{t}`")));
                }
                if domains.iter().any(|d| d.name == name) {
                    return Err(invalid(line, format!("duplicate domain `{name}`")));
                }
                domains.push(Domain { name: name.to_string(), ..Domain::default() });
            }
            "switch" => {
                let dom = domains.last_mut().ok_or_else(|| perr(line, "`switch` before any `domain`"))?;
                let name = toks.next().ok_or_else(|| perr(line, "missing switch name"))?;
                let border = match toks.next() {
                    None => false,
                    Some("gateway") => true,
                    Some(t) => return Err(perr(line, format!("unexpected `{t}`"))),
                };
                if let Some(t) = toks.next() {
                    return Err(perr(line, format!("unexpected `{t}`")));
                }
                if dom.switch_index(name).is_some() {
                    return Err(invalid(line, format!("duplicate switch `{}:{name}`", dom.name)));
                }
                dom.switches.push(Switch { name: name.to_string(), border });
            }
            "link" => {
                let dom = domains.last_mut().ok_or_else(|| perr(line, "`link` before any `domain`"))?;
                let u = toks.next().ok_or_else(|| perr(line, "missing link endpoint"))?;
                let v = toks.next().ok_or_else(|| perr(line, "missing link endpoint"))?;
                let (cost, cap) = cost_cap(toks, line)?;
                let a = dom
                    .switch_index(u)
                    .ok_or_else(|| invalid(line, format!("unknown switch `{}:{u}`", dom.name)))?;
                let b = dom
                    .switch_index(v)
                    .ok_or_else(|| invalid(line, format!("unknown switch `{}:{v}`", dom.name)))?;
                if a == b {
                    return Err(invalid(line, format!("self-loop on `{}:{u}`", dom.name)));
                }
                if dom.link_between(a, b).is_some() {
                    return Err(invalid(line, format!("duplicate link `{}:{u}`–`{v}`", dom.name)));
                }
                dom.links.push(IntraLink { a, b, cost, capacity: cap });
                costs.push(Pending { line, cost, cap });
            }
            "interlink" => {
                let ends: Vec<&str> = toks.by_ref().take(2).collect();
                if ends.len() < 2 {
                    return Err(perr(line, "interlink needs two `domain:switch` endpoints"));
                }
                let (cost, cap) = cost_cap(toks, line)?;
                let split = |e: &str| {
                    e.split_once(':')
                        .map(|(d, s)| (d.to_string(), s.to_string()))
                        .ok_or_else(|| perr(line, format!("endpoint `{e}` is not `domain:switch`")))
                };
                let (da, sa) = split(ends[0])?;
                let (db, sb) = split(ends[1])?;
                inter.push((line, da, sa, db, sb, cost, cap));
                costs.push(Pending { line, cost, cap });
            }
            "policy" => {
                let dom = toks.next().ok_or_else(|| perr(line, "missing policy domain"))?;
                let u = toks.next().ok_or_else(|| perr(line, "missing policy switch"))?;
                let v = toks.next().ok_or_else(|| perr(line, "missing policy switch"))?;
                let val = toks.next().ok_or_else(|| perr(line, "missing policy value"))?;
                let val = if val == "refuse" {
                    None
                } else {
                    Some(val.parse::<u64>().map_err(|_| perr(line, format!("bad policy value `{val}`")))?)
                };
                if let Some(t) = toks.next() {
                    return Err(perr(line, format!("unexpected `{t}`")));
                }
                policies.push((line, dom.to_string(), u.to_string(), v.to_string(), val));
            }
            other => return Err(perr(line, format!("unknown statement `{other}`"))),
        }
    }

    let (_, c_max) = c_max.ok_or_else(|| TopologyError::Invalid("missing `cmax` statement".into()))?;
    for p in &costs {
        if p.cost < 1 || p.cost > c_max {
            return Err(invalid(p.line, format!("cost {} outside [1, {c_max}]", p.cost)));
        }
        if p.cap == Some(0) {
            return Err(invalid(p.line, "capacity must be at least 1"));
        }
    }
    for d in &domains {
        if d.switches.is_empty() {
            return Err(TopologyError::Invalid(format!("domain `{}` has no switches", d.name)));
        }
    }

    let lookup = |domains: &[Domain], line: usize, d: &str, s: &str| -> Result<SwitchId, TopologyError> {
        let di = domains
            .iter()
            .position(|x| x.name == d)
            .ok_or_else(|| invalid(line, format!("unknown domain `{d}`")))?;
        let si = domains[di]
            .switch_index(s)
            .ok_or_else(|| invalid(line, format!("unknown switch `{d}:{s}`")))?;
        Ok(SwitchId::new(di, si))
    };

    let mut inter_links = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, da, sa, db, sb, cost, cap) in inter {
        let a = lookup(&domains, line, &da, &sa)?;
        let b = lookup(&domains, line, &db, &sb)?;
        if a.domain == b.domain {
            return Err(invalid(line, format!("interlink `{da}:{sa}`–`{db}:{sb}` lies inside one domain")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(invalid(line, format!("duplicate interlink `{da}:{sa}`–`{db}:{sb}`")));
        }
        inter_links.push(InterLink { a, b, cost, capacity: cap });
    }

    for (line, d, u, v, val) in policies {
        let a = lookup(&domains, line, &d, &u)?;
        let b = lookup(&domains, line, &d, &v)?;
        if a == b {
            return Err(invalid(line, "policy needs two distinct switches"));
        }
        let rule = match val {
            None => PolicyOverride::Refuse,
            Some(c) if (1..=c_max).contains(&c) => PolicyOverride::Cost(c),
            Some(c) => return Err(invalid(line, format!("policy cost {c} outside [1, {c_max}]"))),
        };
        let key = (a.index.min(b.index), a.index.max(b.index));
        if domains[a.domain].policy.insert(key, rule).is_some() {
            return Err(invalid(line, format!("duplicate policy for `{d}:{u}`–`{v}`")));
        }
    }

    Ok(MultiDomainNetwork { c_max, domains, inter_links })
}

pub(super) fn render(net: &MultiDomainNetwork) -> String {
    let mut out = String::new();
    let cap = |c: Option<u64>| c.map(|c| format!(" cap {c}")).unwrap_or_default();
    writeln!(out, "cmax {}", net.c_max).unwrap();
    for d in &net.domains {
        writeln!(out, "\ndomain {}", d.name).unwrap();
        for s in &d.switches {
            let flag = if s.border { " gateway" } else { "" };
            writeln!(out, "switch {}{flag}", s.name).unwrap();
        }
        for l in &d.links {
            writeln!(
                out,
                "link {} {} cost {}{}",
                d.switches[l.a].name,
                d.switches[l.b].name,
                l.cost,
                cap(l.capacity)
            )
            .unwrap();
        }
    }
    if !net.inter_links.is_empty() {
        out.push('\n');
    }
    for l in &net.inter_links {
        writeln!(out, "interlink {} {} cost {}{}", net.label(l.a), net.label(l.b), l.cost, cap(l.capacity)).unwrap();
    }
    let mut first = true;
    for d in &net.domains {
        for (&(a, b), rule) in &d.policy {
            if first {
                out.push('\n');
                first = false;
            }
            let v = match rule {
                PolicyOverride::Cost(c) => c.to_string(),
                PolicyOverride::Refuse => "refuse".into(),
            };
            writeln!(out, "policy {} {} {} {v}", d.name, d.switches[a].name, d.switches[b].name).unwrap();
        }
    }
    out
}
