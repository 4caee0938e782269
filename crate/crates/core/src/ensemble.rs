//! Linear ensembles over binary tool outputs and the boolean rule they
//! implement.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest tool count whose truth table is enumerated.
pub const MAX_RULE_INPUTS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("no training rows")]
    Empty,
    #[error("expected {expected} inputs, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{k} tools exceed the truth-table bound of {max}")]
    Capacity { k: usize, max: usize },
    #[error("subsample of {got} rows is smaller than the {needed} needed")]
    InsufficientData { needed: usize, got: usize },
    #[error("fraction {0} outside (0, 1]")]
    Fraction(f64),
    #[error("rule parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
}

pub type Result<T> = std::result::Result<T, EnsembleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// L2-regularized logistic regression.
    #[default]
    Logistic,
    /// L2-regularized hinge-loss linear classifier.
    LinearMargin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub family: ModelFamily,
    /// Inverse regularization strength on the weights (not the bias).
    pub c: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            family: ModelFamily::Logistic,
            c: 1.0,
            tolerance: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub tool_order: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub family: ModelFamily,
    /// Probability boundary; the model predicts true strictly above it.
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl EnsembleModel {
    pub fn decision_value(&self, inputs: &[bool]) -> Result<f64> {
        if inputs.len() != self.weights.len() {
            return Err(EnsembleError::Dimension {
                expected: self.weights.len(),
                got: inputs.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(inputs)
            .filter(|(_, &x)| x)
            .map(|(w, _)| w)
            .sum::<f64>()
            + self.bias)
    }

    /// True iff w·x + b > 0; a value of exactly zero is false.
    pub fn predict(&self, inputs: &[bool]) -> Result<bool> {
        Ok(self.decision_value(inputs)? > 0.0)
    }

    pub fn predict_all(&self, rows: &[Vec<bool>]) -> Result<Vec<bool>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    fn constant(tools: &[String], value: bool, family: ModelFamily) -> Self {
        Self {
            tool_order: tools.to_vec(),
            weights: vec![0.0; tools.len()],
            bias: if value { 1.0 } else { -1.0 },
            family,
            threshold: 0.5,
            warning: Some(format!(
                "labels contain a single class; model always predicts {value}"
            )),
        }
    }
}

fn check_shape(features: &[Vec<bool>], labels: &[bool], k: usize) -> Result<()> {
    if features.is_empty() {
        return Err(EnsembleError::Empty);
    }
    if labels.len() != features.len() {
        return Err(EnsembleError::Dimension {
            expected: features.len(),
            got: labels.len(),
        });
    }
    if let Some(row) = features.iter().find(|r| r.len() != k) {
        return Err(EnsembleError::Dimension {
            expected: k,
            got: row.len(),
        });
    }
    Ok(())
}

/// Fits the configured family. `seed` orders the coordinate sweeps of the
/// margin family; logistic fitting is deterministic without it.
pub fn train(
    features: &[Vec<bool>],
    labels: &[bool],
    tools: &[String],
    seed: u64,
    config: &TrainConfig,
) -> Result<EnsembleModel> {
    check_shape(features, labels, tools.len())?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Ok(EnsembleModel::constant(tools, positives > 0, config.family));
    }
    let (weights, bias) = match config.family {
        ModelFamily::Logistic => fit_logistic(features, labels, config),
        ModelFamily::LinearMargin => fit_margin(features, labels, seed, config),
    };
    Ok(EnsembleModel {
        tool_order: tools.to_vec(),
        weights,
        bias,
        family: config.family,
        threshold: 0.5,
        warning: None,
    })
}

pub fn train_logistic(features: &[Vec<bool>], labels: &[bool], tools: &[String], seed: u64) -> Result<EnsembleModel> {
    train(features, labels, tools, seed, &TrainConfig::default())
}

fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Identical rows collapse to (pattern, #positive, #negative), which keeps
/// Newton steps cheap for the usual handful of tools.
fn aggregate(features: &[Vec<bool>], labels: &[bool]) -> Vec<(Vec<f64>, f64, f64)> {
    let mut groups: std::collections::BTreeMap<&[bool], (f64, f64)> = std::collections::BTreeMap::new();
    for (row, &y) in features.iter().zip(labels) {
        let g = groups.entry(row.as_slice()).or_default();
        if y {
            g.0 += 1.0;
        } else {
            g.1 += 1.0;
        }
    }
    groups
        .into_iter()
        .map(|(row, (p, n))| {
            let mut x: Vec<f64> = row.iter().map(|&b| f64::from(u8::from(b))).collect();
            x.push(1.0);
            (x, p, n)
        })
        .collect()
}

/// Minimizes Σ cross-entropy + ‖w‖²/(2C) by damped Newton steps.
fn fit_logistic(features: &[Vec<bool>], labels: &[bool], config: &TrainConfig) -> (Vec<f64>, f64) {
    let data = aggregate(features, labels);
    let d = features[0].len() + 1;
    let lambda = 1.0 / config.c;
    let objective = |theta: &DVector<f64>| -> f64 {
        let mut f = 0.0;
        for (x, p, n) in &data {
            let z: f64 = x.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            f += p * log1pexp(-z) + n * log1pexp(z);
        }
        f + 0.5 * lambda * theta.rows(0, d - 1).norm_squared()
    };
    let mut theta = DVector::<f64>::zeros(d);
    let mut f = objective(&theta);
    for _ in 0..config.max_iter {
        let mut grad = DVector::<f64>::zeros(d);
        let mut hess = DMatrix::<f64>::zeros(d, d);
        for (x, p, n) in &data {
            let z: f64 = x.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            let s = sigmoid(z);
            let g = (p + n) * s - p;
            let h = (p + n) * s * (1.0 - s);
            for i in 0..d {
                grad[i] += g * x[i];
                for j in 0..d {
                    hess[(i, j)] += h * x[i] * x[j];
                }
            }
        }
        for i in 0..d - 1 {
            grad[i] += lambda * theta[i];
            hess[(i, i)] += lambda;
        }
        if grad.amax() < config.tolerance {
            break;
        }
        // The bias curvature can underflow on nearly saturated fits.
        hess[(d - 1, d - 1)] += 1e-12;
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => match hess.lu().solve(&grad) {
                Some(s) => s,
                None => grad.clone(),
            },
        };
        let mut t = 1.0;
        let slope = grad.dot(&step);
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta - t * &step;
            let fc = objective(&cand);
            if fc <= f - 1e-4 * t * slope {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let bias = theta[d - 1];
    (theta.rows(0, d - 1).iter().copied().collect(), bias)
}

/// Dual coordinate descent for the hinge-loss primal
/// ½‖w‖² + C Σ max(0, 1 − y(w·x + b)), with the bias as an extra input.
fn fit_margin(features: &[Vec<bool>], labels: &[bool], seed: u64, config: &TrainConfig) -> (Vec<f64>, f64) {
    let n = features.len();
    let d = features[0].len() + 1;
    let xs: Vec<Vec<f64>> = features
        .iter()
        .map(|r| {
            let mut x: Vec<f64> = r.iter().map(|&b| f64::from(u8::from(b))).collect();
            x.push(1.0);
            x
        })
        .collect();
    let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let qii: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = config.tolerance.max(1e-8);
    for _ in 0..(config.max_iter * 50) {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let wx: f64 = w.iter().zip(&xs[i]).map(|(a, b)| a * b).sum();
            let g = ys[i] * wx - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= config.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-14 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, config.c);
                let delta = (alpha[i] - old) * ys[i];
                for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                    *wj += delta * xj;
                }
            }
        }
        if pg_max - pg_min < tol {
            break;
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    (w, bias)
}

/// A product term: inputs whose bit is set in `mask` must equal the
/// corresponding bit of `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Implicant {
    pub mask: u32,
    pub value: u32,
}

impl Implicant {
    pub fn covers(&self, minterm: u32) -> bool {
        minterm & self.mask == self.value
    }

    pub fn literal_count(&self) -> u32 {
        self.mask.count_ones()
    }

    /// (input index, negated) pairs in input order.
    pub fn literals(&self, k: usize) -> Vec<(usize, bool)> {
        (0..k)
            .filter(|&i| self.mask >> i & 1 == 1)
            .map(|i| (i, self.value >> i & 1 == 0))
            .collect()
    }
}

/// Quine–McCluskey: all prime implicants of the on-set, then essential
/// primes plus a greedy cover of what remains. Input `i` is bit `i` of the
/// table index.
pub fn minimize(table: &[bool], k: usize) -> Result<Vec<Implicant>> {
    if k > MAX_RULE_INPUTS {
        return Err(EnsembleError::Capacity {
            k,
            max: MAX_RULE_INPUTS,
        });
    }
    if table.len() != 1usize << k {
        return Err(EnsembleError::Dimension {
            expected: 1 << k,
            got: table.len(),
        });
    }
    let full = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    let ones: Vec<u32> = (0..table.len() as u32).filter(|&m| table[m as usize]).collect();
    if ones.is_empty() {
        return Ok(Vec::new());
    }
    if ones.len() == table.len() {
        return Ok(vec![Implicant { mask: 0, value: 0 }]);
    }

    let mut primes: std::collections::BTreeSet<Implicant> = std::collections::BTreeSet::new();
    let mut current: std::collections::BTreeSet<Implicant> = ones
        .iter()
        .map(|&m| Implicant { mask: full, value: m })
        .collect();
    while !current.is_empty() {
        let terms: Vec<Implicant> = current.iter().copied().collect();
        let mut combined = vec![false; terms.len()];
        let mut next = std::collections::BTreeSet::new();
        for i in 0..terms.len() {
            for j in i + 1..terms.len() {
                let (a, b) = (terms[i], terms[j]);
                if a.mask != b.mask {
                    continue;
                }
                let diff = a.value ^ b.value;
                if diff.count_ones() == 1 {
                    next.insert(Implicant {
                        mask: a.mask & !diff,
                        value: a.value & !diff,
                    });
                    combined[i] = true;
                    combined[j] = true;
                }
            }
        }
        for (t, used) in terms.iter().zip(&combined) {
            if !used {
                primes.insert(*t);
            }
        }
        current = next;
    }

    let primes: Vec<Implicant> = primes.into_iter().collect();
    let mut uncovered: std::collections::BTreeSet<u32> = ones.iter().copied().collect();
    let mut chosen: Vec<Implicant> = Vec::new();
    for &m in &ones {
        let covering: Vec<&Implicant> = primes.iter().filter(|p| p.covers(m)).collect();
        if covering.len() == 1 && !chosen.contains(covering[0]) {
            chosen.push(*covering[0]);
        }
    }
    uncovered.retain(|&m| !chosen.iter().any(|p| p.covers(m)));
    while !uncovered.is_empty() {
        let best = primes
            .iter()
            .filter(|p| !chosen.contains(p))
            .max_by(|a, b| {
                let ca = uncovered.iter().filter(|&&m| a.covers(m)).count();
                let cb = uncovered.iter().filter(|&&m| b.covers(m)).count();
                ca.cmp(&cb)
                    .then(b.literal_count().cmp(&a.literal_count()))
                    .then(b.cmp(a))
            })
            .copied()
            .expect("primes cover every minterm");
        uncovered.retain(|&m| !best.covers(m));
        chosen.push(best);
    }
    chosen.sort_by_key(|t| (t.literal_count(), t.literals(k)));
    Ok(chosen)
}

pub fn evaluate_terms(terms: &[Implicant], input: u32) -> bool {
    terms.iter().any(|t| t.covers(input))
}

/// Disjunctive normal form over tool literals with its truth table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BooleanRule {
    pub tools: Vec<String>,
    pub terms: Vec<Implicant>,
    pub truth_table: Vec<bool>,
    pub expression: String,
}

impl BooleanRule {
    pub fn from_table(table: Vec<bool>, tools: &[String]) -> Result<Self> {
        let terms = minimize(&table, tools.len())?;
        let expression = render_terms(&terms, tools);
        Ok(Self {
            tools: tools.to_vec(),
            terms,
            truth_table: table,
            expression,
        })
    }

    pub fn evaluate(&self, inputs: &[bool]) -> Result<bool> {
        if inputs.len() != self.tools.len() {
            return Err(EnsembleError::Dimension {
                expected: self.tools.len(),
                got: inputs.len(),
            });
        }
        Ok(evaluate_terms(&self.terms, bits_to_index(inputs)))
    }

    pub fn has_negation(&self) -> bool {
        self.terms.iter().any(|t| t.mask & !t.value != 0)
    }
}

pub fn bits_to_index(inputs: &[bool]) -> u32 {
    inputs
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (u32::from(b) << i))
}

pub fn index_to_bits(index: u32, k: usize) -> Vec<bool> {
    (0..k).map(|i| index >> i & 1 == 1).collect()
}

/// "TRUE", "FALSE", "(A OR B)" when every term is one literal, otherwise
/// "(A AND B) OR (NOT C)"-style parenthesized terms.
pub fn render_terms(terms: &[Implicant], tools: &[String]) -> String {
    if terms.is_empty() {
        return "FALSE".to_string();
    }
    if terms.iter().any(|t| t.mask == 0) {
        return "TRUE".to_string();
    }
    let literal = |(i, neg): (usize, bool)| {
        if neg {
            format!("NOT {}", tools[i])
        } else {
            tools[i].clone()
        }
    };
    if terms.iter().all(|t| t.literal_count() == 1) {
        let parts: Vec<String> = terms
            .iter()
            .map(|t| literal(t.literals(tools.len())[0]))
            .collect();
        return format!("({})", parts.join(" OR "));
    }
    terms
        .iter()
        .map(|t| {
            let lits: Vec<String> = t.literals(tools.len()).into_iter().map(literal).collect();
            format!("({})", lits.join(" AND "))
        })
        .collect::<Vec<_>>()
        .join(" OR ")
}

pub fn truth_table(model: &EnsembleModel) -> Result<Vec<bool>> {
    let k = model.weights.len();
    if k > MAX_RULE_INPUTS {
        return Err(EnsembleError::Capacity {
            k,
            max: MAX_RULE_INPUTS,
        });
    }
    (0..1u32 << k)
        .map(|m| model.predict(&index_to_bits(m, k)))
        .collect()
}

/// Runs every input combination through the model and simplifies the
/// resulting table.
pub fn extract_boolean_rule(model: &EnsembleModel) -> Result<BooleanRule> {
    BooleanRule::from_table(truth_table(model)?, &model.tool_order)
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Const(bool),
    Var(usize),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    fn eval(&self, input: u32) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Var(i) => input >> i & 1 == 1,
            Expr::Not(e) => !e.eval(input),
            Expr::And(es) => es.iter().all(|e| e.eval(input)),
            Expr::Or(es) => es.iter().any(|e| e.eval(input)),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tools: Vec<(usize, &'a str)>,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> EnsembleError {
        EnsembleError::Parse {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn at_boundary(&self, end: usize) -> bool {
        self.src[end..]
            .chars()
            .next()
            .is_none_or(|c| c.is_whitespace() || c == '(' || c == ')')
    }

    fn eat_word(&mut self, word: &str) -> bool {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        if rest.starts_with(word) && self.at_boundary(self.pos + word.len()) {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    fn eat_char(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        while self.eat_word("OR") {
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 { terms.pop().expect("one term") } else { Expr::Or(terms) })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut factors = vec![self.factor()?];
        while self.eat_word("AND") {
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().expect("one factor")
        } else {
            Expr::And(factors)
        })
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat_word("NOT") {
            return Ok(Expr::Not(Box::new(self.factor()?)));
        }
        if self.eat_char('(') {
            let e = self.expr()?;
            if !self.eat_char(')') {
                return Err(self.err("expected ')'"));
            }
            return Ok(e);
        }
        if self.eat_word("TRUE") {
            return Ok(Expr::Const(true));
        }
        if self.eat_word("FALSE") {
            return Ok(Expr::Const(false));
        }
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let found = self
            .tools
            .iter()
            .find(|(_, name)| rest.starts_with(name) && self.at_boundary(self.pos + name.len()))
            .copied();
        match found {
            Some((i, name)) => {
                self.pos += name.len();
                Ok(Expr::Var(i))
            }
            None => Err(self.err("expected a tool name, NOT, TRUE, FALSE or '('")),
        }
    }
}

/// Truth table of a rendered rule over `tools`.
pub fn parse_rule(expression: &str, tools: &[String]) -> Result<Vec<bool>> {
    let k = tools.len();
    if k > MAX_RULE_INPUTS {
        return Err(EnsembleError::Capacity {
            k,
            max: MAX_RULE_INPUTS,
        });
    }
    let mut named: Vec<(usize, &str)> = tools.iter().map(String::as_str).enumerate().collect();
    named.sort_by_key(|(_, n)| std::cmp::Reverse(n.len()));
    let mut p = Parser {
        src: expression,
        pos: 0,
        tools: named,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != expression.len() {
        return Err(p.err("trailing input"));
    }
    Ok((0..1u32 << k).map(|m| e.eval(m)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityConfig {
    pub fraction: f64,
    pub trials: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            fraction: 0.8,
            trials: 100,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub trials: usize,
    pub fraction: f64,
    /// Trials whose rule has the reference truth table.
    pub same: usize,
    /// `None` when no trials ran.
    pub percent_same: Option<f64>,
    pub reference_rule: BooleanRule,
}

/// Retrains on random subsamples and counts how often the extracted rule
/// matches the one learned from all rows.
pub fn stability_analysis(
    features: &[Vec<bool>],
    labels: &[bool],
    tools: &[String],
    config: &StabilityConfig,
) -> Result<StabilityReport> {
    if !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(EnsembleError::Fraction(config.fraction));
    }
    check_shape(features, labels, tools.len())?;
    let n = features.len();
    let m = (config.fraction * n as f64).floor() as usize;
    if m < tools.len() + 1 {
        return Err(EnsembleError::InsufficientData {
            needed: tools.len() + 1,
            got: m,
        });
    }
    let reference = train(features, labels, tools, config.seed, &config.train)?;
    let reference_rule = extract_boolean_rule(&reference)?;
    let outcomes: Vec<bool> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64 + 1);
            let mut idx = index::sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            let xs: Vec<Vec<bool>> = idx.iter().map(|&i| features[i].clone()).collect();
            let ys: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
            let model = train(&xs, &ys, tools, config.seed.wrapping_add(t as u64 + 1), &config.train)?;
            Ok(truth_table(&model)? == reference_rule.truth_table)
        })
        .collect::<Result<Vec<bool>>>()?;
    let same = outcomes.iter().filter(|&&s| s).count();
    Ok(StabilityReport {
        trials: config.trials,
        fraction: config.fraction,
        same,
        percent_same: (config.trials > 0).then(|| same as f64 / config.trials as f64 * 100.0),
        reference_rule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| ((b'A' + i as u8) as char).to_string()).collect()
    }

    fn corners(k: usize, copies: usize, f: impl Fn(&[bool]) -> bool) -> (Vec<Vec<bool>>, Vec<bool>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for m in 0..1u32 << k {
            let x = index_to_bits(m, k);
            for _ in 0..copies {
                ys.push(f(&x));
                xs.push(x.clone());
            }
        }
        (xs, ys)
    }

    fn model(w: &[f64], b: f64) -> EnsembleModel {
        EnsembleModel {
            tool_order: names(w.len()),
            weights: w.to_vec(),
            bias: b,
            family: ModelFamily::Logistic,
            threshold: 0.5,
            warning: None,
        }
    }

    #[test]
    fn predict_arithmetic() {
        assert!(model(&[2.0, 2.0], -1.0).predict(&[true, false]).unwrap());
        assert!(!model(&[2.0, 2.0], -3.0).predict(&[true, false]).unwrap());
        assert!(!model(&[2.0, 2.0], -2.0).predict(&[true, false]).unwrap());
        assert_eq!(
            model(&[2.0, 2.0], -1.0).predict(&[true]),
            Err(EnsembleError::Dimension { expected: 2, got: 1 })
        );
    }

    #[test]
    fn learns_or_of_first_and_third() {
        let (xs, ys) = corners(3, 100, |x| x[0] || x[2]);
        let m = train_logistic(&xs, &ys, &names(3), 0).unwrap();
        let rule = extract_boolean_rule(&m).unwrap();
        assert_eq!(rule.expression, "(A OR C)");
        for i in 0..8u32 {
            let x = index_to_bits(i, 3);
            assert_eq!(m.predict(&x).unwrap(), x[0] || x[2]);
        }
    }

    #[test]
    fn copies_a_single_column() {
        let (xs, ys) = corners(4, 50, |x| x[1]);
        let m = train_logistic(&xs, &ys, &names(4), 0).unwrap();
        assert_eq!(extract_boolean_rule(&m).unwrap().expression, "(B)");
    }

    #[test]
    fn majority_of_three() {
        let (xs, ys) = corners(3, 40, |x| x.iter().filter(|&&b| b).count() >= 2);
        let m = train_logistic(&xs, &ys, &names(3), 0).unwrap();
        assert_eq!(
            extract_boolean_rule(&m).unwrap().expression,
            "(A AND B) OR (A AND C) OR (B AND C)"
        );
    }

    #[test]
    fn single_class_is_constant() {
        let (xs, _) = corners(2, 3, |_| false);
        let ys = vec![false; xs.len()];
        let m = train_logistic(&xs, &ys, &names(2), 0).unwrap();
        assert!(m.warning.is_some());
        assert_eq!(extract_boolean_rule(&m).unwrap().expression, "FALSE");
        let m = train_logistic(&xs, &vec![true; xs.len()], &names(2), 0).unwrap();
        assert_eq!(extract_boolean_rule(&m).unwrap().expression, "TRUE");
    }

    #[test]
    fn margin_family_learns_or() {
        let (xs, ys) = corners(3, 30, |x| x[0] || x[2]);
        let cfg = TrainConfig {
            family: ModelFamily::LinearMargin,
            ..TrainConfig::default()
        };
        let m = train(&xs, &ys, &names(3), 5, &cfg).unwrap();
        assert_eq!(extract_boolean_rule(&m).unwrap().expression, "(A OR C)");
    }

    #[test]
    fn rendering_and_parsing() {
        let tools: Vec<String> = ["CONSORT-TM", "pre-rob", "SciScore"].iter().map(|s| s.to_string()).collect();
        let table = parse_rule(
            "(CONSORT-TM AND pre-rob) OR (pre-rob AND SciScore) OR (CONSORT-TM AND SciScore)",
            &tools,
        )
        .unwrap();
        let rule = BooleanRule::from_table(table.clone(), &tools).unwrap();
        assert_eq!(parse_rule(&rule.expression, &tools).unwrap(), table);
        let neg = parse_rule("(NOT pre-rob AND SciScore)", &tools).unwrap();
        let r = BooleanRule::from_table(neg.clone(), &tools).unwrap();
        assert_eq!(r.expression, "(NOT pre-rob AND SciScore)");
        assert!(r.has_negation());
        assert!(parse_rule("(pre-rob OR Nope)", &tools).is_err());
        assert!(parse_rule("pre-rob)", &tools).is_err());
    }

    #[test]
    fn capacity_bound() {
        let m = model(&vec![1.0; 21], 0.0);
        assert_eq!(
            extract_boolean_rule(&m),
            Err(EnsembleError::Capacity { k: 21, max: 20 })
        );
    }

    #[test]
    fn stability_on_separable_column() {
        let (xs, ys) = corners(3, 125, |x| x[1]);
        let report = stability_analysis(
            &xs,
            &ys,
            &names(3),
            &StabilityConfig {
                trials: 20,
                ..StabilityConfig::default()
            },
        )
        .unwrap();
        assert_eq!(report.percent_same, Some(100.0));
        let none = stability_analysis(
            &xs,
            &ys,
            &names(3),
            &StabilityConfig {
                trials: 0,
                ..StabilityConfig::default()
            },
        )
        .unwrap();
        assert_eq!(none.percent_same, None);
    }
}
