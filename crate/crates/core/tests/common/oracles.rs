//! Reference implementations written independently of the library code.

use std::collections::HashMap;

use clarify_core::model::ClarificationLabel;

/// Rounds num/den half-up at three decimals via the fourth decimal digit.
/// A zero denominator counts as 0.
fn round_fraction(num: u128, den: u128) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let tenths_of_thousandths = num * 10_000 / den;
    let mut thousandths = tenths_of_thousandths / 10;
    if tenths_of_thousandths % 10 >= 5 {
        thousandths += 1;
    }
    thousandths as f64 / 1000.0
}

/// (num, den) with den = 0 meaning "undefined, scored as 0".
type Frac = (u128, u128);

fn value(f: Frac) -> Frac {
    if f.1 == 0 {
        (0, 1)
    } else {
        f
    }
}

fn harmonic(p: Frac, r: Frac) -> Frac {
    let (p, r) = (value(p), value(r));
    if p.0 == 0 || r.0 == 0 {
        return (0, 1);
    }
    (2 * p.0 * r.0, p.0 * r.1 + r.0 * p.1)
}

fn mean(a: Frac, b: Frac) -> Frac {
    let (a, b) = (value(a), value(b));
    (a.0 * b.1 + b.0 * a.1, 2 * a.1 * b.1)
}

/// Nine rounded cells (needed P/R/F1, not-needed P/R/F1, macro P/R/F1)
/// computed by scanning individual (gold, predicted) pairs.
pub fn metrics_from_pairs(pairs: &[(ClarificationLabel, ClarificationLabel)]) -> [f64; 9] {
    let class = |c: ClarificationLabel| -> [Frac; 3] {
        let hits = pairs.iter().filter(|(g, p)| *g == c && *p == c).count() as u128;
        let predicted = pairs.iter().filter(|(_, p)| *p == c).count() as u128;
        let gold = pairs.iter().filter(|(g, _)| *g == c).count() as u128;
        let p = (hits, predicted);
        let r = (hits, gold);
        [p, r, harmonic(p, r)]
    };
    let n = class(ClarificationLabel::Needed);
    let nn = class(ClarificationLabel::NotNeeded);
    let m = [mean(n[0], nn[0]), mean(n[1], nn[1]), mean(n[2], nn[2])];
    let mut out = [0.0; 9];
    for (i, f) in n.iter().chain(&nn).chain(&m).enumerate() {
        out[i] = round_fraction(f.0, f.1);
    }
    out
}

/// Expands counts into per-record label pairs.
pub fn pairs_for(tp: u64, fp: u64, fn_: u64, tn: u64) -> Vec<(ClarificationLabel, ClarificationLabel)> {
    use ClarificationLabel::{Needed, NotNeeded};
    let mut v = Vec::new();
    v.extend((0..tp).map(|_| (Needed, Needed)));
    v.extend((0..fp).map(|_| (NotNeeded, Needed)));
    v.extend((0..fn_).map(|_| (Needed, NotNeeded)));
    v.extend((0..tn).map(|_| (NotNeeded, NotNeeded)));
    v
}

/// Alias (space-separated lowercase words) to entity ids in record order.
pub fn alias_table(records: &[(String, Vec<String>)]) -> HashMap<Vec<String>, Vec<String>> {
    let mut table: HashMap<Vec<String>, Vec<String>> = HashMap::new();
    for (id, aliases) in records {
        for alias in aliases {
            let key: Vec<String> = alias.split_whitespace().map(str::to_owned).collect();
            let ids = table.entry(key).or_default();
            if !ids.contains(id) {
                ids.push(id.clone());
            }
        }
    }
    table
}

/// Enumerates every token interval, keeps alias hits, then repeatedly takes
/// the leftmost remaining hit (longest on ties) that starts after the last one.
pub fn leftmost_longest(
    tokens: &[String],
    table: &HashMap<Vec<String>, Vec<String>>,
) -> Vec<(usize, usize, Vec<String>)> {
    let mut hits = Vec::new();
    for start in 0..tokens.len() {
        for end in start + 1..=tokens.len() {
            if table.contains_key(&tokens[start..end]) {
                hits.push((start, end));
            }
        }
    }
    let mut out = Vec::new();
    let mut cursor = 0;
    loop {
        let best = hits
            .iter()
            .filter(|(s, _)| *s >= cursor)
            .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let Some(&(s, e)) = best else { break };
        out.push((s, e, table[&tokens[s..e]].clone()));
        cursor = e;
    }
    out
}
