use std::collections::HashSet;

use crate::dsl::lexer::{tokenize, Tok, Token};
use crate::dsl::{ExperimentSection, ParseError, ParseErrorKind, TreeDocument, EXPERIMENT_HEADER};
use crate::engine::{ActionModel, ConditionModel, NodeDef, NodeKind, NodeStatus, Span};
use crate::harness::{
    ExperimentConfig, HarnessError, MetricSpec, ParamPath, SweepAxis, DEFAULT_DT, DEFAULT_MAX_TICKS, DEFAULT_TRIALS,
};
use crate::progress::{NoisyLinearParams, ParamError, PerpetualParams, ProfileParams};
use crate::scalar::Scalar;
use crate::sync::{BarrierSet, RelThreshold, SyncError};

const MAX_DEPTH: usize = 256;

/// Parses a `.bt` document: one root node, optionally followed by an
/// `[experiment]` section.
pub fn parse_tree<S: Scalar>(text: &str) -> Result<TreeDocument<S>, ParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let header = lines.iter().position(|l| strip_comment(l).trim() == EXPERIMENT_HEADER);
    let tree_text = match header {
        Some(h) => lines[..h].join("\n"),
        None => text.to_string(),
    };
    let tokens = tokenize(&tree_text, 1)?;
    let end = end_position(&lines[..header.unwrap_or(lines.len())]);
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
        leaf_names: HashSet::new(),
    };
    let root = parser.node(0)?;
    if let Some(t) = parser.peek() {
        return Err(error_at(t, ParseErrorKind::TrailingInput));
    }
    let experiment = match header {
        Some(h) => Some(parse_experiment(&root, &lines, h)?),
        None => None,
    };
    Ok(TreeDocument {
        source: text.to_string(),
        root,
        experiment,
    })
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(before, _)| before)
}

/// Position just past the last non-blank character (or 1:1 for blank input).
fn end_position(lines: &[&str]) -> (usize, usize) {
    lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| {
            let content = strip_comment(l).trim_end();
            (!content.is_empty()).then(|| (i + 1, content.chars().count() + 1))
        })
        .unwrap_or((1, 1))
}

fn error_at(token: &Token, kind: ParseErrorKind) -> ParseError {
    ParseError {
        kind,
        line: token.line,
        column: token.column,
        token: token.tok.text(),
    }
}

#[derive(Debug, Clone)]
enum Value {
    Number(Token),
    Ident(Token),
    List(Token),
}

impl Value {
    fn token(&self) -> &Token {
        match self {
            Value::Number(t) | Value::Ident(t) | Value::List(t) => t,
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
    leaf_names: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eof(&self, expected: &'static str) -> ParseError {
        ParseError {
            kind: ParseErrorKind::UnexpectedEof(expected),
            line: self.end.0,
            column: self.end.1,
            token: String::new(),
        }
    }

    fn next(&mut self, expected: &'static str) -> Result<Token, ParseError> {
        let t = self.tokens.get(self.pos).cloned().ok_or_else(|| self.eof(expected))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<Token, ParseError> {
        let t = self.next(expected)?;
        if t.tok == tok {
            Ok(t)
        } else {
            Err(error_at(&t, ParseErrorKind::Expected(expected)))
        }
    }

    fn ident(&mut self, expected: &'static str) -> Result<(String, Token), ParseError> {
        let t = self.next(expected)?;
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            _ => Err(error_at(&t, ParseErrorKind::Expected(expected))),
        }
    }

    fn number<S: Scalar>(&mut self) -> Result<(S, Token), ParseError> {
        let t = self.next("a number")?;
        let v = number_value(&t)?;
        Ok((v, t))
    }

    fn number_list(&mut self) -> Result<(Token, Vec<Token>), ParseError> {
        let open = self.expect(Tok::LBracket, "`[`")?;
        let mut items = Vec::new();
        if self.peek().map(|t| &t.tok) == Some(&Tok::RBracket) {
            self.pos += 1;
            return Ok((open, items));
        }
        loop {
            let t = self.next("a number")?;
            if !matches!(t.tok, Tok::Number(_)) {
                return Err(error_at(&t, ParseErrorKind::Expected("a number")));
            }
            items.push(t);
            let sep = self.next("`,` or `]`")?;
            match sep.tok {
                Tok::Comma => continue,
                Tok::RBracket => break,
                _ => return Err(error_at(&sep, ParseErrorKind::Expected("`,` or `]`"))),
            }
        }
        Ok((open, items))
    }

    fn node<S: Scalar>(&mut self, depth: usize) -> Result<NodeDef<S>, ParseError> {
        let (word, kw) = self.ident("a node keyword")?;
        if depth > MAX_DEPTH {
            return Err(error_at(&kw, ParseErrorKind::TooDeep(MAX_DEPTH)));
        }
        let span = Some(Span {
            line: kw.line,
            column: kw.column,
        });
        let kind = match word.as_str() {
            "sequence" => NodeKind::Sequence,
            "fallback" => NodeKind::Fallback,
            "parallel" => NodeKind::Parallel,
            "parallel_abs" => {
                self.keyword_param("barriers", "`barriers`")?;
                let (open, items) = self.number_list()?;
                let values = items.iter().map(number_value).collect::<Result<Vec<S>, _>>()?;
                let barriers = BarrierSet::new(values).map_err(|e| match e {
                    SyncError::BarrierOutOfRange { index } => {
                        error_at(&items[index], ParseErrorKind::BarrierOutOfRange)
                    }
                    SyncError::BarriersNotIncreasing { index } => {
                        error_at(&items[index], ParseErrorKind::BarriersNotIncreasing)
                    }
                    SyncError::DeltaOutOfRange => error_at(&open, ParseErrorKind::BarrierOutOfRange),
                })?;
                NodeKind::AbsSyncParallel(barriers)
            }
            "parallel_rel" => {
                self.keyword_param("delta", "`delta`")?;
                let (delta, t) = self.number::<S>()?;
                let delta =
                    RelThreshold::new(delta).map_err(|_| error_at(&t, ParseErrorKind::DeltaOutOfRange))?;
                NodeKind::RelSyncParallel(delta)
            }
            "action" | "condition" => return self.leaf(word == "action", span),
            _ => return Err(error_at(&kw, ParseErrorKind::UnknownKeyword(word))),
        };
        self.expect(Tok::LBrace, "`{`")?;
        let mut children = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.eof("`}`")),
                Some(t) if t.tok == Tok::RBrace => {
                    self.pos += 1;
                    break;
                }
                Some(_) => children.push(self.node(depth + 1)?),
            }
        }
        if children.is_empty() {
            return Err(error_at(&kw, ParseErrorKind::EmptyComposite));
        }
        Ok(NodeDef {
            kind,
            children,
            span,
        })
    }

    fn keyword_param(&mut self, name: &str, expected: &'static str) -> Result<(), ParseError> {
        let (word, t) = self.ident(expected)?;
        if word != name {
            return Err(error_at(&t, ParseErrorKind::Expected(expected)));
        }
        self.expect(Tok::Equals, "`=`")?;
        Ok(())
    }

    fn leaf<S: Scalar>(&mut self, is_action: bool, span: Option<Span>) -> Result<NodeDef<S>, ParseError> {
        let (name, name_tok) = self.ident("a leaf name")?;
        if is_keyword(&name) {
            return Err(error_at(&name_tok, ParseErrorKind::Expected("a leaf name")));
        }
        let mut params: Vec<(String, Value)> = Vec::new();
        let mut keys = Vec::new();
        while let (Some(Token { tok: Tok::Ident(_), .. }), Some(Token { tok: Tok::Equals, .. })) =
            (self.tokens.get(self.pos), self.tokens.get(self.pos + 1))
        {
            let (key, key_tok) = self.ident("a parameter")?;
            self.pos += 1;
            let value = match self.peek() {
                Some(Token { tok: Tok::LBracket, .. }) => {
                    let (open, _) = self.number_list()?;
                    Value::List(open)
                }
                _ => {
                    let t = self.next("a value")?;
                    match t.tok {
                        Tok::Number(_) => Value::Number(t),
                        Tok::Ident(_) => Value::Ident(t),
                        _ => return Err(error_at(&t, ParseErrorKind::Expected("a value"))),
                    }
                }
            };
            if params.iter().any(|(k, _)| *k == key) {
                return Err(error_at(&key_tok, ParseErrorKind::DuplicateParam(key)));
            }
            params.push((key, value));
            keys.push(key_tok);
        }
        if !self.leaf_names.insert(name.clone()) {
            return Err(error_at(&name_tok, ParseErrorKind::DuplicateLeaf(name)));
        }
        let leaf = LeafParams {
            params,
            keys,
            name_tok,
        };
        let kind = if is_action {
            NodeKind::Action {
                model: leaf.action_model()?,
                name,
            }
        } else {
            NodeKind::Condition {
                model: leaf.condition_model()?,
                name,
            }
        };
        Ok(NodeDef {
            kind,
            children: Vec::new(),
            span,
        })
    }
}

fn is_keyword(word: &str) -> bool {
    matches!(
        word,
        "sequence" | "fallback" | "parallel" | "parallel_abs" | "parallel_rel" | "action" | "condition"
    )
}

fn number_value<S: Scalar>(t: &Token) -> Result<S, ParseError> {
    match &t.tok {
        Tok::Number(s) => S::parse_decimal(s).ok_or_else(|| error_at(t, ParseErrorKind::InvalidNumber(s.clone()))),
        _ => Err(error_at(t, ParseErrorKind::Expected("a number"))),
    }
}

struct LeafParams {
    params: Vec<(String, Value)>,
    /// Key tokens, aligned with `params`.
    keys: Vec<Token>,
    name_tok: Token,
}

impl LeafParams {
    fn get(&self, key: &str) -> Option<&Value> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn check_known(&self, model: &str, allowed: &[&str]) -> Result<(), ParseError> {
        for ((k, _), key_tok) in self.params.iter().zip(&self.keys) {
            if k != "model" && !allowed.contains(&k.as_str()) {
                return Err(error_at(
                    key_tok,
                    ParseErrorKind::UnknownParam {
                        model: model.into(),
                        param: k.clone(),
                    },
                ));
            }
        }
        Ok(())
    }

    fn num<S: Scalar>(&self, model: &str, key: &'static str, default: Option<S>) -> Result<S, ParseError> {
        match self.get(key) {
            Some(Value::Number(t)) => number_value(t),
            Some(v) => Err(error_at(
                v.token(),
                ParseErrorKind::InvalidParam {
                    param: key.into(),
                    reason: "expected a number".into(),
                },
            )),
            None => default.ok_or_else(|| {
                error_at(
                    &self.name_tok,
                    ParseErrorKind::MissingParam {
                        model: model.into(),
                        param: key,
                    },
                )
            }),
        }
    }

    fn word(&self, model: &str, key: &'static str) -> Result<(String, &Token), ParseError> {
        match self.get(key) {
            Some(Value::Ident(t)) => Ok((t.tok.text(), t)),
            Some(v) => Err(error_at(
                v.token(),
                ParseErrorKind::InvalidParam {
                    param: key.into(),
                    reason: "expected an identifier".into(),
                },
            )),
            None => Err(error_at(
                &self.name_tok,
                ParseErrorKind::MissingParam {
                    model: model.into(),
                    param: key,
                },
            )),
        }
    }

    fn param_error(&self, e: ParamError) -> ParseError {
        let param = match e {
            ParamError::NotPositive { name } | ParamError::Negative { name } => name,
        };
        let at = self.get(param).map_or(&self.name_tok, Value::token);
        error_at(
            at,
            ParseErrorKind::InvalidParam {
                param: param.into(),
                reason: e.to_string(),
            },
        )
    }

    fn action_model<S: Scalar>(&self) -> Result<ActionModel<S>, ParseError> {
        let model = match self.get("model") {
            Some(_) => self.word("action", "model")?.0,
            None if self.get("handle").is_some() => "handle".into(),
            None if self.get("alpha").is_some() => "noisy_linear".into(),
            None => return Err(error_at(&self.name_tok, ParseErrorKind::MissingModel)),
        };
        let m = model.as_str();
        Ok(match m {
            "noisy_linear" => {
                self.check_known(m, &["alpha", "omega"])?;
                let params = NoisyLinearParams::new(self.num(m, "alpha", None)?, self.num(m, "omega", Some(S::zero()))?)
                    .map_err(|e| self.param_error(e))?;
                ActionModel::NoisyLinear(params)
            }
            "profile_straight" => {
                self.check_known(m, &["increment"])?;
                ActionModel::Profile(ProfileParams::straight(self.num(m, "increment", None)?).map_err(|e| self.param_error(e))?)
            }
            "profile_sigmoid" => {
                self.check_known(m, &["midpoint", "steepness"])?;
                ActionModel::Profile(
                    ProfileParams::sigmoid(self.num(m, "midpoint", None)?, self.num(m, "steepness", None)?)
                        .map_err(|e| self.param_error(e))?,
                )
            }
            "perpetual" => {
                self.check_known(m, &["bound", "drift", "correction", "error"])?;
                let params = PerpetualParams::new(
                    self.num(m, "bound", None)?,
                    self.num(m, "drift", Some(S::zero()))?,
                    self.num(m, "correction", Some(S::zero()))?,
                )
                .map_err(|e| self.param_error(e))?;
                let initial_error = self.num(m, "error", Some(S::zero()))?;
                if initial_error < S::zero() {
                    return Err(self.param_error(ParamError::Negative { name: "error" }));
                }
                ActionModel::Perpetual { params, initial_error }
            }
            "constant" => {
                self.check_known(m, &["status"])?;
                let (word, t) = self.word(m, "status")?;
                let status = NodeStatus::parse(&word).ok_or_else(|| {
                    error_at(
                        t,
                        ParseErrorKind::InvalidParam {
                            param: "status".into(),
                            reason: "expected success, running or failure".into(),
                        },
                    )
                })?;
                ActionModel::Constant(status)
            }
            "handle" => {
                self.check_known(m, &["handle"])?;
                ActionModel::Handle(self.word(m, "handle")?.0)
            }
            _ => {
                let t = self.get("model").map_or(&self.name_tok, Value::token);
                return Err(error_at(t, ParseErrorKind::UnknownModel(model)));
            }
        })
    }

    fn condition_model(&self) -> Result<ConditionModel, ParseError> {
        if self.get("handle").is_some() {
            self.check_known("condition", &["handle"])?;
            return Ok(ConditionModel::Handle(self.word("condition", "handle")?.0));
        }
        self.check_known("condition", &["value"])?;
        let (word, t) = self.word("condition", "value")?;
        match word.as_str() {
            "true" => Ok(ConditionModel::Constant(true)),
            "false" => Ok(ConditionModel::Constant(false)),
            _ => Err(error_at(
                t,
                ParseErrorKind::InvalidParam {
                    param: "value".into(),
                    reason: "expected true or false".into(),
                },
            )),
        }
    }
}

fn setting_error(line: usize, column: usize, token: &str, kind: ParseErrorKind) -> ParseError {
    ParseError {
        kind,
        line,
        column,
        token: token.to_string(),
    }
}

fn parse_experiment<S: Scalar>(
    root: &NodeDef<S>,
    lines: &[&str],
    header: usize,
) -> Result<ExperimentSection<S>, ParseError> {
    let mut trials = None;
    let mut base_seed = None;
    let mut dt = None;
    let mut max_ticks = None;
    let mut metric_name: Option<(String, usize)> = None;
    let mut window = None;
    let mut channel = None;
    let mut p_bar = None;
    let mut t_expected = None;
    let mut sweep = Vec::new();
    let mut seen = HashSet::new();

    for (i, raw) in lines.iter().enumerate().skip(header + 1) {
        let line_no = i + 1;
        let content = strip_comment(raw);
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let column = raw[..indent].chars().count() + 1;
        let Some((lhs, rhs)) = content.split_once('=') else {
            return Err(setting_error(line_no, column, content.trim(), ParseErrorKind::Expected("`key = value`")));
        };
        let key = lhs.trim();
        let value = rhs.trim();
        let value_col = raw[..content.len() - rhs.trim_start().len()].chars().count() + 1;
        let bad = |reason: &str| {
            setting_error(
                line_no,
                value_col,
                value,
                ParseErrorKind::InvalidSetting {
                    key: key.to_string(),
                    reason: reason.to_string(),
                },
            )
        };
        if let Some(path_text) = key.strip_prefix("sweep ") {
            let path_text = path_text.trim();
            let path_offset = lhs.len() - lhs.trim_start().len() + "sweep".len();
            let path_offset = path_offset + lhs[path_offset..].len() - lhs[path_offset..].trim_start().len();
            let path_col = raw[..path_offset].chars().count() + 1;
            let bad_path = |reason: &str| {
                setting_error(
                    line_no,
                    path_col,
                    path_text,
                    ParseErrorKind::InvalidSetting {
                        key: key.to_string(),
                        reason: reason.to_string(),
                    },
                )
            };
            let path = ParamPath::parse(path_text).ok_or_else(|| bad_path("malformed parameter path"))?;
            let values = parse_list(value)
                .and_then(|items| items.iter().map(|s| S::parse_decimal(s)).collect::<Option<Vec<S>>>())
                .ok_or_else(|| bad("expected a list of numbers"))?;
            if values.is_empty() {
                return Err(bad("sweep list is empty"));
            }
            let axis = SweepAxis { path, values };
            let mut probe = ExperimentConfig::new(root.clone(), MetricSpec::ProgressDistance { window: None });
            probe.sweep = vec![axis.clone()];
            probe.validate().map_err(|e| match e {
                HarnessError::InvalidValue { .. } => bad(&e.to_string()),
                _ => bad_path(&e.to_string()),
            })?;
            sweep.push(axis);
            continue;
        }
        if !seen.insert(key.to_string()) {
            return Err(setting_error(line_no, column, key, ParseErrorKind::DuplicateSetting(key.into())));
        }
        match key {
            "trials" => {
                trials = Some(value.parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(|| bad("expected an integer >= 1"))?)
            }
            "base_seed" => base_seed = Some(value.parse::<u64>().map_err(|_| bad("expected an unsigned integer"))?),
            "dt" => {
                dt = Some(
                    f64::parse_decimal(value)
                        .filter(|&d| d > 0.0)
                        .ok_or_else(|| bad("expected a positive number"))?,
                )
            }
            "max_ticks" => {
                max_ticks = Some(value.parse::<u64>().ok().filter(|&n| n >= 1).ok_or_else(|| bad("expected an integer >= 1"))?)
            }
            "metric" => match value {
                "progress_distance" | "predictability_distance" => metric_name = Some((value.to_string(), line_no)),
                _ => return Err(bad("expected progress_distance or predictability_distance")),
            },
            "window" => {
                let items = parse_list(value)
                    .and_then(|items| items.iter().map(|s| s.parse::<u64>().ok()).collect::<Option<Vec<_>>>())
                    .filter(|v| v.len() == 2 && v[0] <= v[1])
                    .ok_or_else(|| bad("expected [k1, k2] with k1 <= k2"))?;
                window = Some((items[0], items[1]));
            }
            "channel" => {
                if value.is_empty() || value.contains(char::is_whitespace) {
                    return Err(bad("expected a leaf name"));
                }
                channel = Some(value.to_string());
            }
            "p_bar" => {
                p_bar = Some(
                    S::parse_decimal(value)
                        .filter(|p| *p >= S::zero() && *p <= S::one())
                        .ok_or_else(|| bad("expected a number in [0, 1]"))?,
                )
            }
            "t_expected" => t_expected = Some(f64::parse_decimal(value).ok_or_else(|| bad("expected a number"))?),
            _ => return Err(setting_error(line_no, column, key, ParseErrorKind::UnknownSetting(key.into()))),
        }
    }

    let metric = match metric_name.as_ref().map(|(m, l)| (m.as_str(), *l)) {
        Some(("predictability_distance", line)) => {
            let missing = |key: &str| {
                setting_error(
                    line,
                    1,
                    "metric",
                    ParseErrorKind::InvalidSetting {
                        key: key.into(),
                        reason: "required by predictability_distance".into(),
                    },
                )
            };
            let channel = channel.ok_or_else(|| missing("channel"))?;
            let known = root.walk().iter().any(|n| n.kind.leaf_name() == Some(channel.as_str()));
            if !known {
                return Err(setting_error(
                    line,
                    1,
                    &channel,
                    ParseErrorKind::InvalidSetting {
                        key: "channel".into(),
                        reason: format!("no leaf named `{channel}`"),
                    },
                ));
            }
            MetricSpec::PredictabilityDistance {
                channel,
                p_bar: p_bar.ok_or_else(|| missing("p_bar"))?,
                t_expected: t_expected.ok_or_else(|| missing("t_expected"))?,
            }
        }
        _ => MetricSpec::ProgressDistance { window },
    };

    Ok(ExperimentSection {
        trials: trials.unwrap_or(DEFAULT_TRIALS),
        base_seed: base_seed.unwrap_or(0),
        dt: dt.unwrap_or(DEFAULT_DT),
        max_ticks: max_ticks.unwrap_or(DEFAULT_MAX_TICKS),
        metric,
        sweep,
    })
}

fn parse_list(text: &str) -> Option<Vec<String>> {
    let inner = text.strip_prefix('[')?.strip_suffix(']')?.trim();
    if inner.is_empty() {
        return Some(Vec::new());
    }
    Some(inner.split(',').map(|s| s.trim().to_string()).collect())
}
