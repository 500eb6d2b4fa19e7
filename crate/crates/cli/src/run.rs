//! Executes a [`RunConfig`]. Everything here is a pure function of the
//! config and the files it names.

use std::collections::BTreeMap;
use std::time::Duration;

use qdhj::extremal::{avoiding_greedy, max_avoiding_exact, verify_avoiding, CayleySpec, ExactOptions, ShapeFamily};
use qdhj::identities::{powerset_square_sum, predicted_powerset_residual, representation_counts, shifted_powerset_sum};
use qdhj::mdqhj::{
    check_counting_lemma, composition_demo, good_strings, slice_by, verify_subspace_in_set, Bipartition,
    CombSubspaceSpec, KSet, SliceTable,
};
use qdhj::search::{SearchMode, SearchOptions};
use qdhj::subspace::{parse_basis, SpanIter};
use qdhj::{
    classify_shape, find_line, find_rect_pair, find_square_pairs, parity_membership, parse_grid, random_subspace,
    spiral_basis, square_vector, verify_certificate, Certificate, Error, IndexSet, PointSet, Rational, Result,
    SetSource,
};
use serde_json::{json, Value};

use crate::config::{parse_ratio, Command, RunConfig};

pub enum Body {
    Json(Value),
    Text(String),
}

/// A finished run. `ok = false` maps to exit code 1.
pub struct Outcome {
    pub body: Body,
    pub ok: bool,
}

fn json(value: Value, ok: bool) -> Result<Outcome> {
    Ok(Outcome { body: Body::Json(value), ok })
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("--{flag} is required")))
}

fn ratio(text: Option<&String>, flag: &str) -> Result<Rational> {
    let text = text.ok_or_else(|| usage(format!("--{flag} is required")))?;
    parse_ratio(text).map_err(usage)
}

fn read_input(cfg: &RunConfig) -> Result<String> {
    match &cfg.input {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display()))),
        None => {
            let mut s = String::new();
            std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)
                .map_err(|e| usage(format!("cannot read stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn load_set(cfg: &RunConfig) -> Result<(SetSource, PointSet)> {
    let src = cfg.set.clone().ok_or_else(|| usage("--set is required"))?;
    let set = src.build()?;
    Ok((src, set))
}

fn label(word: &[u8]) -> String {
    word.iter().map(|&l| char::from(b'0' + l)).collect()
}

fn spec_value(spec: &CombSubspaceSpec) -> Value {
    serde_json::from_str(&spec.to_json()).expect("spec json")
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Subspace => subspace(cfg),
        Command::Classify => classify(cfg),
        Command::RectPair => rect_pair(cfg),
        Command::SquarePairs | Command::Lines => squares(cfg),
        Command::Identities => identities(cfg),
        Command::Repcounts => repcounts(cfg),
        Command::Mdqhj => mdqhj(cfg),
        Command::Extremal => extremal(cfg),
        Command::Verify => verify(cfg),
    }
}

/// Largest side for which every square `γ×γ` is tested.
const SQUARE_SCAN_MAX: usize = 20;

fn subspace(cfg: &RunConfig) -> Result<Outcome> {
    let n = need(cfg.n, "n")?;
    let h = spiral_basis(n)?;
    let elements = h.basis().elements();
    let expected = n * n - 2;
    let elements_ok = elements
        .iter()
        .map(|e| parity_membership(&h, e))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .all(|b| b);
    let squares = if n <= SQUARE_SCAN_MAX {
        let (mut checked, mut inside, mut mismatches) = (0u64, 0u64, 0u64);
        for g in IndexSet::nonempty_subsets(n) {
            let member = parity_membership(&h, &square_vector(&g))?;
            checked += 1;
            inside += member as u64;
            mismatches += (member != (g.len() % 4 == 0)) as u64;
        }
        Some((checked, inside, mismatches))
    } else {
        None
    };
    let parity_ok = h.rank() == expected
        && elements.len() == expected
        && h.rank() + h.functionals().len() == n * n
        && elements_ok
        && squares.is_none_or(|s| s.2 == 0);
    json(
        json!({
            "n": n,
            "rank": h.rank(),
            "expected_rank": expected,
            "functionals": h.functionals().len(),
            "membership_mode": h.mode(),
            "parity_ok": parity_ok,
            "squares": squares.map(|(c, i, m)| json!({"checked": c, "in_subspace": i, "mismatches": m})),
            "basis": elements.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        }),
        parity_ok,
    )
}

fn classify(cfg: &RunConfig) -> Result<Outcome> {
    let v = parse_grid(&read_input(cfg)?)?;
    let shape = classify_shape(&v);
    json(
        json!({
            "n": v.n(),
            "popcount": v.popcount(),
            "shape": shape.kind().as_str(),
            "gamma1": shape.gamma1().map(|g| g.to_vec()),
            "gamma2": shape.gamma2().map(|g| g.to_vec()),
        }),
        true,
    )
}

fn rect_pair(cfg: &RunConfig) -> Result<Outcome> {
    let (src, set) = load_set(cfg)?;
    let n = set.n();
    let gammas: Vec<IndexSet> = match &cfg.gamma {
        Some(g) => vec![IndexSet::from_members(n, g.iter().copied())?],
        None => IndexSet::nonempty_subsets(n).collect(),
    };
    let mut results = Vec::with_capacity(gammas.len());
    let mut missing = 0;
    for g in &gammas {
        let cert = find_rect_pair(&set, g)?.map(|mut c| {
            c.search.set = Some(src.clone());
            c.to_value()
        });
        missing += cert.is_none() as usize;
        results.push(json!({"gamma1": g.to_vec(), "certificate": cert}));
    }
    json(
        json!({
            "set": src,
            "size": set.len(),
            "density": set.density::<f64>(),
            "found": gammas.len() - missing,
            "missing": missing,
            "results": results,
        }),
        missing == 0,
    )
}

fn squares(cfg: &RunConfig) -> Result<Outcome> {
    let (src, set) = load_set(cfg)?;
    let defaults = SearchOptions::default();
    let opts = SearchOptions {
        limit: cfg.limit.unwrap_or(defaults.limit),
        mode: cfg.mode.unwrap_or(SearchMode::Auto),
        seed: cfg.seed,
        budget: cfg.budget.unwrap_or(defaults.budget),
    };
    let out = if cfg.command == Command::Lines {
        find_line(&set, &opts)
    } else {
        find_square_pairs(&set, &opts)
    };
    let certs: Vec<Value> = out
        .certificates
        .into_iter()
        .map(|mut c| {
            c.search.set = Some(src.clone());
            c.to_value()
        })
        .collect();
    let found = !certs.is_empty();
    json(
        json!({
            "set": src,
            "size": set.len(),
            "complete": out.complete,
            "probes": out.probes,
            "count": certs.len(),
            "certificates": certs,
        }),
        found,
    )
}

/// Largest side for which the shifted sums over all disjoint pairs are checked.
const SHIFTED_MAX: usize = 10;
const IDENTITIES_MAX: usize = 16;

fn identities(cfg: &RunConfig) -> Result<Outcome> {
    let n = need(cfg.n, "n")?;
    if n == 0 || n > IDENTITIES_MAX {
        return Err(usage(format!("identities needs 1 <= n <= {IDENTITIES_MAX}")));
    }
    let [lo, hi] = cfg.gamma_size.unwrap_or([1, n]);
    if lo == 0 || hi > n {
        return Err(usage(format!("--gamma-size must lie within 1..{n}")));
    }
    let mut rows = Vec::new();
    let mut all_ok = true;
    let mut all_zero = true;
    for size in lo..=hi {
        let (mut count, mut zero, mut predicted) = (0u64, 0u64, 0u64);
        for g in IndexSet::nonempty_subsets(n).filter(|g| g.len() == size) {
            let sum = powerset_square_sum(&g)?;
            count += 1;
            zero += sum.is_zero() as u64;
            predicted += (sum == predicted_powerset_residual(&g)?) as u64;
        }
        let expect_zero = size >= 3;
        all_ok &= predicted == count && (zero == count) == expect_zero;
        all_zero &= zero == count;
        rows.push(json!({
            "size": size,
            "count": count,
            "zero": zero,
            "expected_zero": expect_zero,
            "matches_prediction": predicted == count,
        }));
    }
    let shifted = if n <= SHIFTED_MAX {
        let (mut checked, mut zero) = (0u64, 0u64);
        for g1 in IndexSet::nonempty_subsets(n).filter(|g| g.len() >= lo.max(3) && g.len() <= hi) {
            let rest = IndexSet::from_mask(n, IndexSet::full(n)?.mask() & !g1.mask())?;
            for g2 in rest.subsets() {
                checked += 1;
                zero += shifted_powerset_sum(&g1, &g2)?.0.is_zero() as u64;
            }
        }
        all_ok &= zero == checked;
        Some(json!({"checked": checked, "zero": zero}))
    } else {
        None
    };
    json(
        json!({"n": n, "sizes": [lo, hi], "all_zero": all_zero, "all_ok": all_ok, "powerset": rows, "shifted": shifted}),
        all_ok,
    )
}

fn repcounts(cfg: &RunConfig) -> Result<Outcome> {
    let elements = if cfg.input.is_some() {
        parse_basis(&read_input(cfg)?)?
    } else if let Some(src) = &cfg.set {
        src.build()?.members().to_vec()
    } else {
        let n = need(cfg.n, "n")?;
        let dim = need(cfg.m, "m")?;
        SpanIter::new(n, random_subspace(n, dim, cfg.seed)?)?.skip(1).collect()
    };
    let t = representation_counts(&elements)?;
    if cfg.format.as_deref() == Some("csv") {
        return Ok(Outcome { ok: t.all_ok(), body: Body::Text(t.to_csv()) });
    }
    let counts: Vec<Value> = t.counts.iter().map(|(g, r)| json!({"gamma": g.to_hex(), "r": r})).collect();
    json(
        json!({
            "m": t.m,
            "distinct_sums": t.counts.len(),
            "sum": t.sum,
            "pairs": t.pairs,
            "max_r": t.max_r,
            "max_allowed": t.max_allowed,
            "triple_lhs": t.triple_lhs.to_string(),
            "triple_rhs": t.triple_rhs.to_string(),
            "sum_ok": t.sum_ok(),
            "max_ok": t.max_ok(),
            "triple_ok": t.triple_ok(),
            "violations": t.violations(),
            "counts": counts,
        }),
        t.all_ok(),
    )
}

fn load_kset(cfg: &RunConfig) -> Result<KSet> {
    let k = cfg.k.unwrap_or(2);
    match cfg.set.as_ref().ok_or_else(|| usage("--set is required"))? {
        SetSource::Random { n, size, seed } => KSet::seeded(k, n * n, *size, *seed),
        SetSource::File { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            KSet::parse(&text, k)
        }
        src if k == 2 => Ok(KSet::from_point_set(&src.build()?)),
        _ => Err(usage("only random and file sets are available for k > 2")),
    }
}

fn partition(cfg: &RunConfig, set: &KSet) -> Result<Bipartition> {
    let len = set.word_len();
    match (&cfg.p, cfg.m) {
        (Some(p), _) => Bipartition::new(len, p),
        (None, Some(m)) => {
            let side = (1..=len).find(|s| s * s == len).ok_or_else(|| usage("words do not fill a square grid"))?;
            Bipartition::block(side, m)
        }
        (None, None) => Err(usage("--p or --m is required")),
    }
}

fn table_header(table: &SliceTable) -> Value {
    json!({
        "k": table.k,
        "p": table.partition.p,
        "q": table.partition.q,
        "slice_size": table.slice_size().to_string(),
        "label_count": table.label_count().to_string(),
        "mass": table.mass(),
    })
}

fn mdqhj(cfg: &RunConfig) -> Result<Outcome> {
    let action = cfg.action.as_deref().unwrap_or("decompose");
    match action {
        "decompose" | "good" => {
            let set = load_kset(cfg)?;
            let table = slice_by(&set, partition(cfg, &set)?)?;
            let mut doc = table_header(&table);
            if action == "decompose" {
                let rows: Vec<Value> = table
                    .rows::<f64>()
                    .map(|(z, d)| json!({"label": label(z), "count": table.counts[z], "density": d}))
                    .collect();
                doc["rows"] = Value::Array(rows);
                return json(doc, true);
            }
            let eps = ratio(cfg.eps.as_ref(), "eps")?;
            let good = good_strings(&table, eps);
            let check = check_counting_lemma(&table, eps);
            doc["eps"] = json!(eps.to_string());
            doc["premise"] = json!(check.premise);
            doc["good"] = json!(check.good);
            doc["holds"] = json!(check.holds);
            doc["good_labels"] = json!(good.iter().map(|z| label(z)).collect::<Vec<_>>());
            json(doc, check.holds)
        }
        "compose" => {
            let set = load_kset(cfg)?;
            let m = need(cfg.m, "m")?;
            let eps = ratio(cfg.eps.as_ref(), "eps")?;
            match composition_demo::<Rational>(&set, m, eps)? {
                None => json(json!({"found": false}), false),
                Some(d) => json(
                    json!({
                        "found": true,
                        "good_labels": d.good_labels,
                        "sigma_candidates": d.sigma_candidates,
                        "sigma_support": d.sigma_support,
                        "sigma": spec_value(&d.sigma),
                        "lambda": spec_value(&d.lambda),
                        "product": spec_value(&d.product),
                        "verified": d.verified,
                    }),
                    d.verified,
                ),
            }
        }
        "verify" => {
            let spec = CombSubspaceSpec::from_json(&read_input(cfg)?)?;
            let set = load_kset(cfg)?;
            let ok = verify_subspace_in_set(&set, &spec);
            json(json!({"dim": spec.dim(), "spec": spec_value(&spec), "verified": ok}), ok)
        }
        "from-line" => {
            let cert = Certificate::from_json(&read_input(cfg)?)?;
            let spec = CombSubspaceSpec::from_line(&cert)?;
            let src = cfg
                .set
                .clone()
                .or_else(|| cert.search.set.clone())
                .ok_or_else(|| usage("certificate names no set; pass --set"))?;
            let set = KSet::from_point_set(&src.build()?);
            let ok = verify_subspace_in_set(&set, &spec);
            json(json!({"spec": spec_value(&spec), "verified": ok}), ok)
        }
        other => Err(usage(format!("unknown mdqhj action {other:?}"))),
    }
}

fn extremal(cfg: &RunConfig) -> Result<Outcome> {
    let n = need(cfg.n, "n")?;
    let spec = match cfg.family.unwrap_or(ShapeFamily::SquareShapes) {
        ShapeFamily::SquareShapes => CayleySpec::square_shapes(n)?,
        ShapeFamily::RectShapes => CayleySpec::rect_shapes(n)?,
        ShapeFamily::Custom => return Err(usage("custom families are library-only")),
    };
    let default = if n <= 3 { "exact" } else { "greedy" };
    let result = match cfg.action.as_deref().unwrap_or(default) {
        "exact" => max_avoiding_exact(
            &spec,
            ExactOptions {
                time_limit: cfg.time_limit.map(Duration::from_secs),
            },
        )?,
        "greedy" => {
            let warm = cfg.warm.as_ref().map(SetSource::build).transpose()?;
            avoiding_greedy(&spec, cfg.seed, warm.as_ref())?
        }
        other => return Err(usage(format!("unknown extremal method {other:?}"))),
    };
    let verified = verify_avoiding(&spec, &result.witness);
    let mut doc = result.to_json_value();
    doc["verified"] = json!(verified);
    json(doc, verified)
}

/// Every object in `v` that looks like a certificate.
fn collect_certificates(v: &Value, out: &mut Vec<Value>) {
    match v {
        Value::Object(map) => {
            if ["kind", "a", "b", "oriented"].iter().all(|k| map.contains_key(*k)) {
                out.push(v.clone());
            } else {
                map.values().for_each(|x| collect_certificates(x, out));
            }
        }
        Value::Array(items) => items.iter().for_each(|x| collect_certificates(x, out)),
        _ => {}
    }
}

fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let text = read_input(cfg)?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    let mut raw = Vec::new();
    collect_certificates(&doc, &mut raw);
    if raw.is_empty() {
        return Err(usage("input holds no certificates"));
    }
    let total = raw.len();
    let mut sets: BTreeMap<String, PointSet> = BTreeMap::new();
    let mut failures = Vec::new();
    for (i, v) in raw.into_iter().enumerate() {
        let cert = Certificate::from_value(v)?;
        let src = cfg
            .set
            .clone()
            .or_else(|| cert.search.set.clone())
            .ok_or_else(|| usage(format!("certificate {i} names no set; pass --set")))?;
        let key = serde_json::to_string(&src).expect("source json");
        if !sets.contains_key(&key) {
            sets.insert(key.clone(), src.build()?);
        }
        if !verify_certificate(&cert, &sets[&key]) {
            failures.push(i);
        }
    }
    let ok = failures.is_empty();
    json(json!({"checked": total, "verified": total - failures.len(), "failures": failures}), ok)
}
