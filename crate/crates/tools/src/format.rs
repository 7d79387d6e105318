//! Line-oriented text formats.
//!
//! Node indices are 0-based; class and segment ids are 1-based in files and
//! 0-based in memory. Blank lines and lines starting with `#` are skipped,
//! except that a `# grid <height> <width>` comment is remembered.
//!
//! ```text
//! AMWC <num_nodes> <num_edges> <K>      instance
//! P <k> ...
//! N <c_1> ... <c_K>                     one per node
//! E <i> <j> <cost>                      one per edge, i < j, sorted
//!
//! GT <num_nodes> <num_segments>         ground truth
//! <segment>                             one per node
//! S <segment> <class>                   one per segment
//! T <class> <area_threshold>            one per class
//!
//! SOL <J> <objective>                   solution
//! <segment> <class>                     one per node
//! S <segment> <class>                   one per segment
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use amwc_core::graph::{check_feasibility, evaluate, CostGraph, GroundTruth, Labeling};
use amwc_core::train::LinearCostModel;
use amwc_core::{ClassId, SegmentId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

/// Grid shape `(height, width)` carried in a `# grid` comment.
pub type Grid = (usize, usize);

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    grid: Option<Grid>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), grid: None, last: 0 }
    }

    /// Next content line as `(line number, fields)`.
    fn next_fields(&mut self) -> Result<Option<(usize, Vec<&'a str>)>, ParseError> {
        for (idx, raw) in self.inner.by_ref() {
            let line = idx + 1;
            self.last = line;
            let text = raw.trim();
            if text.is_empty() {
                continue;
            }
            if let Some(comment) = text.strip_prefix('#') {
                let f: Vec<&str> = comment.split_whitespace().collect();
                if f.first() == Some(&"grid") {
                    if f.len() != 3 {
                        return err(line, "grid comment needs height and width");
                    }
                    self.grid = Some((number(line, f[1], "grid height")?, number(line, f[2], "grid width")?));
                }
                continue;
            }
            return Ok(Some((line, text.split_whitespace().collect())));
        }
        Ok(None)
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), ParseError> {
        match self.next_fields()? {
            Some(x) => Ok(x),
            None => err(self.last + 1, format!("unexpected end of file, expected {what}")),
        }
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        match self.next_fields()? {
            Some((line, f)) => err(line, format!("unexpected trailing line starting with `{}`", f[0])),
            None => Ok(()),
        }
    }
}

fn number<T: FromStr>(line: usize, text: &str, what: &str) -> Result<T, ParseError> {
    text.parse().or_else(|_| err(line, format!("cannot parse {what} `{text}`")))
}

fn real(line: usize, text: &str, what: &str) -> Result<f64, ParseError> {
    let v: f64 = number(line, text, what)?;
    if v.is_finite() {
        Ok(v)
    } else {
        err(line, format!("{what} must be finite"))
    }
}

/// 1-based id in file → 0-based, checked against `count`.
fn one_based(line: usize, text: &str, count: usize, what: &str) -> Result<usize, ParseError> {
    let v: usize = number(line, text, what)?;
    if v == 0 || v > count {
        return err(line, format!("{what} {v} out of range"));
    }
    Ok(v - 1)
}

fn header<'a>(line: usize, f: &[&'a str], tag: &str, arity: usize) -> Result<(), ParseError> {
    if f[0] != tag {
        return err(line, format!("expected `{tag}` header, found `{}`", f[0]));
    }
    if f.len() != arity + 1 {
        return err(line, format!("`{tag}` header takes {arity} fields"));
    }
    Ok(())
}

fn tagged<'a>(line: usize, f: &[&'a str], tag: &str, arity: usize, counted: &str) -> Result<(), ParseError> {
    if f[0] != tag {
        return err(line, format!("expected {counted} line `{tag} ...`, found `{}`", f[0]));
    }
    if f.len() != arity + 1 {
        return err(line, format!("`{tag}` line takes {arity} fields, found {}", f.len() - 1));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub graph: CostGraph,
    pub grid: Option<Grid>,
}

pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let mut lines = Lines::new(text);
    let (line, f) = lines.expect("`AMWC` header")?;
    header(line, &f, "AMWC", 3)?;
    let n: usize = number(line, f[1], "node count")?;
    let m: usize = number(line, f[2], "edge count")?;
    let k: usize = number(line, f[3], "class count")?;
    if k == 0 {
        return err(line, "class count must be positive");
    }

    let (line, f) = lines.expect("`P` line")?;
    if f[0] != "P" {
        return err(line, format!("expected `P` line, found `{}`", f[0]));
    }
    let mut partitionable = Vec::with_capacity(f.len() - 1);
    for t in &f[1..] {
        let class = one_based(line, t, k, "class")?;
        if partitionable.contains(&class) {
            return err(line, format!("class {} listed twice", class + 1));
        }
        partitionable.push(class);
    }

    let mut node_costs = Vec::with_capacity(n * k);
    for _ in 0..n {
        let (line, f) = lines.expect("node line")?;
        tagged(line, &f, "N", k, "node")?;
        for t in &f[1..] {
            node_costs.push(real(line, t, "node cost")?);
        }
    }
    let mut edges = Vec::with_capacity(m);
    let mut edge_costs = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, f) = lines.expect("edge line")?;
        tagged(line, &f, "E", 3, "edge")?;
        let i: usize = number(line, f[1], "node index")?;
        let j: usize = number(line, f[2], "node index")?;
        if i >= j {
            return err(line, format!("edge ({i}, {j}) must satisfy i < j"));
        }
        if j >= n {
            return err(line, format!("node index {j} out of range"));
        }
        if let Some(&prev) = edges.last() {
            if prev >= (i, j) {
                return err(line, format!("edge ({i}, {j}) is not in increasing order"));
            }
        }
        edges.push((i, j));
        edge_costs.push(real(line, f[3], "edge cost")?);
    }
    lines.finish()?;
    let last = lines.last;
    let graph = CostGraph::new(n, k, edges, node_costs, edge_costs, &partitionable)
        .or_else(|e| err(last, e.to_string()))?;
    Ok(Instance { graph, grid: lines.grid })
}

fn grid_comment(out: &mut String, grid: Option<Grid>) {
    if let Some((h, w)) = grid {
        writeln!(out, "# grid {h} {w}").unwrap();
    }
}

pub fn serialize_instance(g: &CostGraph, grid: Option<Grid>) -> String {
    let mut out = String::new();
    grid_comment(&mut out, grid);
    writeln!(out, "AMWC {} {} {}", g.num_nodes(), g.num_edges(), g.num_classes()).unwrap();
    out.push('P');
    for k in g.partitionable_classes() {
        write!(out, " {}", k + 1).unwrap();
    }
    out.push('\n');
    for i in 0..g.num_nodes() {
        out.push('N');
        for c in g.node_row(i) {
            write!(out, " {c:?}").unwrap();
        }
        out.push('\n');
    }
    for (&(i, j), c) in g.edges().iter().zip(g.edge_costs()) {
        writeln!(out, "E {i} {j} {c:?}").unwrap();
    }
    out
}

pub fn parse_ground_truth(text: &str) -> Result<GroundTruth, ParseError> {
    let mut lines = Lines::new(text);
    let (line, f) = lines.expect("`GT` header")?;
    header(line, &f, "GT", 2)?;
    let n: usize = number(line, f[1], "node count")?;
    let j: usize = number(line, f[2], "segment count")?;
    let mut segments = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, f) = lines.expect("node segment line")?;
        if f.len() != 1 {
            return err(line, "node line takes one segment id");
        }
        segments.push(one_based(line, f[0], j, "segment")?);
    }
    let mut raw_classes: Vec<(usize, usize, usize)> = Vec::with_capacity(j);
    let mut seen = vec![false; j];
    for _ in 0..j {
        let (line, f) = lines.expect("segment line")?;
        tagged(line, &f, "S", 2, "segment")?;
        let s = one_based(line, f[1], j, "segment")?;
        if std::mem::replace(&mut seen[s], true) {
            return err(line, format!("segment {} listed twice", s + 1));
        }
        let class: usize = number(line, f[2], "class")?;
        if class == 0 {
            return err(line, "class 0 out of range");
        }
        raw_classes.push((line, s, class - 1));
    }
    let mut thresholds: Vec<Option<f64>> = Vec::new();
    let mut last_line = lines.last;
    while let Some((line, f)) = lines.next_fields()? {
        tagged(line, &f, "T", 2, "threshold")?;
        let class: usize = number(line, f[1], "class")?;
        if class == 0 {
            return err(line, "class 0 out of range");
        }
        let t = real(line, f[2], "area threshold")?;
        if t <= 0.0 {
            return err(line, "area threshold must be positive");
        }
        if thresholds.len() < class {
            thresholds.resize(class, None);
        }
        if thresholds[class - 1].replace(t).is_some() {
            return err(line, format!("class {class} has two thresholds"));
        }
        last_line = line;
    }
    let k = thresholds.len();
    if k == 0 {
        return err(last_line + 1, "no `T` threshold lines");
    }
    if let Some(missing) = thresholds.iter().position(Option::is_none) {
        return err(last_line, format!("class {} has no threshold", missing + 1));
    }
    let mut segment_classes = vec![0; j];
    for (line, s, class) in raw_classes {
        if class >= k {
            return err(line, format!("class {} out of range", class + 1));
        }
        segment_classes[s] = class;
    }
    let thresholds = thresholds.into_iter().map(Option::unwrap).collect();
    GroundTruth::new(segments, segment_classes, thresholds).or_else(|e| err(last_line, e.to_string()))
}

pub fn serialize_ground_truth(gt: &GroundTruth, grid: Option<Grid>) -> String {
    let mut out = String::new();
    grid_comment(&mut out, grid);
    writeln!(out, "GT {} {}", gt.num_nodes(), gt.segment_classes().len()).unwrap();
    for &s in gt.segments() {
        writeln!(out, "{}", s + 1).unwrap();
    }
    for (s, &k) in gt.segment_classes().iter().enumerate() {
        writeln!(out, "S {} {}", s + 1, k + 1).unwrap();
    }
    for (k, t) in gt.area_thresholds().iter().enumerate() {
        writeln!(out, "T {} {t:?}", k + 1).unwrap();
    }
    out
}

/// A solution as stored on disk: enough to evaluate and render without the
/// instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub segments: Vec<SegmentId>,
    pub classes: Vec<ClassId>,
    pub segment_classes: Vec<ClassId>,
    pub objective: f64,
    pub grid: Option<Grid>,
}

impl Solution {
    pub fn from_labeling(lab: &Labeling, grid: Option<Grid>) -> Self {
        Self {
            segments: lab.segments.clone(),
            classes: lab.classes.clone(),
            segment_classes: lab.segment_classes.clone(),
            objective: lab.objective,
            grid,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.segments.len()
    }

    pub fn num_segments(&self) -> usize {
        self.segment_classes.len()
    }

    /// Rebuilds a full labeling against `g`, checking feasibility.
    pub fn to_labeling(&self, g: &CostGraph) -> amwc_core::Result<Labeling> {
        let cut: Vec<bool> = g.edges().iter().map(|&(i, j)| self.segments[i] != self.segments[j]).collect();
        let mut lab = Labeling {
            classes: self.classes.clone(),
            cut,
            segments: self.segments.clone(),
            segment_classes: self.segment_classes.clone(),
            objective: 0.0,
        };
        check_feasibility(g, &lab)?;
        lab.objective = evaluate(g, &lab.classes, &lab.cut);
        Ok(lab)
    }
}

pub fn serialize_solution(sol: &Solution) -> String {
    let mut out = String::new();
    grid_comment(&mut out, sol.grid);
    writeln!(out, "SOL {} {:?}", sol.num_segments(), sol.objective).unwrap();
    for (&z, &x) in sol.segments.iter().zip(&sol.classes) {
        writeln!(out, "{} {}", z + 1, x + 1).unwrap();
    }
    for (s, &k) in sol.segment_classes.iter().enumerate() {
        writeln!(out, "S {} {}", s + 1, k + 1).unwrap();
    }
    out
}

pub fn parse_solution(text: &str) -> Result<Solution, ParseError> {
    let mut lines = Lines::new(text);
    let (line, f) = lines.expect("`SOL` header")?;
    header(line, &f, "SOL", 2)?;
    let j: usize = number(line, f[1], "segment count")?;
    let objective = real(line, f[2], "objective")?;
    let mut segments = Vec::new();
    let mut classes = Vec::new();
    let mut pending = None;
    while let Some((line, f)) = lines.next_fields()? {
        if f[0] == "S" {
            pending = Some((line, f));
            break;
        }
        if f.len() != 2 {
            return err(line, "node line takes a segment id and a class id");
        }
        segments.push(one_based(line, f[0], j, "segment")?);
        let class: usize = number(line, f[1], "class")?;
        if class == 0 {
            return err(line, "class 0 out of range");
        }
        classes.push(class - 1);
    }
    let mut segment_classes: Vec<Option<ClassId>> = vec![None; j];
    for idx in 0..j {
        let (line, f) = match pending.take() {
            Some(x) => x,
            None => lines.expect(&format!("segment line {} of {j}", idx + 1))?,
        };
        tagged(line, &f, "S", 2, "segment")?;
        let s = one_based(line, f[1], j, "segment")?;
        let class: usize = number(line, f[2], "class")?;
        if class == 0 {
            return err(line, "class 0 out of range");
        }
        if segment_classes[s].replace(class - 1).is_some() {
            return err(line, format!("segment {} listed twice", s + 1));
        }
    }
    lines.finish()?;
    let segment_classes: Vec<ClassId> = segment_classes.into_iter().map(Option::unwrap).collect();
    for (i, (&z, &x)) in segments.iter().zip(&classes).enumerate() {
        if segment_classes[z] != x {
            return err(lines.last, format!("node {i}: class differs from its segment's class"));
        }
    }
    Ok(Solution { segments, classes, segment_classes, objective, grid: lines.grid })
}

pub fn serialize_model(m: &LinearCostModel) -> String {
    let mut out = String::new();
    writeln!(out, "MODEL {} {} {}", m.num_classes, m.node_dim, m.edge_dim).unwrap();
    let row = |out: &mut String, tag: &str, values: &[f64]| {
        out.push_str(tag);
        for v in values {
            write!(out, " {v:?}").unwrap();
        }
        out.push('\n');
    };
    for k in 0..m.num_classes {
        row(&mut out, "WV", &m.node_weights[k * m.node_dim..(k + 1) * m.node_dim]);
    }
    row(&mut out, "BV", &m.node_bias);
    row(&mut out, "WE", &m.edge_weights);
    row(&mut out, "BE", &[m.edge_bias]);
    out
}

pub fn parse_model(text: &str) -> Result<LinearCostModel, ParseError> {
    let mut lines = Lines::new(text);
    let (line, f) = lines.expect("`MODEL` header")?;
    header(line, &f, "MODEL", 3)?;
    let k: usize = number(line, f[1], "class count")?;
    let fv: usize = number(line, f[2], "node feature count")?;
    let fe: usize = number(line, f[3], "edge feature count")?;
    let mut m = LinearCostModel::zeros(k, fv, fe);
    let mut read = |tag: &str, into: &mut [f64]| -> Result<(), ParseError> {
        let (line, f) = lines.expect(&format!("`{tag}` line"))?;
        tagged(line, &f, tag, into.len(), "model")?;
        for (slot, t) in into.iter_mut().zip(&f[1..]) {
            *slot = real(line, t, "parameter")?;
        }
        Ok(())
    };
    for c in 0..k {
        read("WV", &mut m.node_weights[c * fv..(c + 1) * fv])?;
    }
    read("BV", &mut m.node_bias)?;
    read("WE", &mut m.edge_weights)?;
    let mut bias = [0.0];
    read("BE", &mut bias)?;
    m.edge_bias = bias[0];
    lines.finish()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = "AMWC 2 1 2\nP 1\nN 0 10\nN 0 10\nE 0 1 -5\n";

    #[test]
    fn instance_round_trip() {
        let inst = parse_instance(PAIR).unwrap();
        assert_eq!(inst.graph.num_edges(), 1);
        assert!(inst.graph.is_partitionable(0) && !inst.graph.is_partitionable(1));
        let text = serialize_instance(&inst.graph, Some((1, 2)));
        let again = parse_instance(&text).unwrap();
        assert_eq!(again.graph, inst.graph);
        assert_eq!(again.grid, Some((1, 2)));
    }

    #[test]
    fn missing_edge_line_reports_its_line() {
        let e = parse_instance("AMWC 2 3 1\nP\nN 0\nN 0\nE 0 1 1\nE 0 1 2\n").unwrap_err();
        assert_eq!(e.line, 6);
        let e = parse_instance("AMWC 2 3 1\nP\nN 0\nN 0\nE 0 1 1\n").unwrap_err();
        assert_eq!(e.line, 6);
        assert!(e.message.contains("edge line"), "{e}");
    }

    #[test]
    fn class_out_of_range_in_p_line() {
        let e = parse_instance("AMWC 1 0 2\nP 3\nN 0 0\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.to_string().contains("class out of range") || e.message.contains("out of range"));
        assert!(e.message.contains("class 3 out of range"));
    }

    #[test]
    fn unparsable_number() {
        let e = parse_instance("AMWC 1 0 1\nP\n# note\nN abc\n").unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("`abc`"));
        assert!(parse_instance("AMWC 1 0 1\nP\nN inf\n").is_err());
    }

    #[test]
    fn ground_truth_round_trip() {
        let gt = GroundTruth::new(vec![0, 1, 1], vec![1, 0], vec![25.0, 100.5]).unwrap();
        let text = serialize_ground_truth(&gt, None);
        assert_eq!(text, "GT 3 2\n1\n2\n2\nS 1 2\nS 2 1\nT 1 25.0\nT 2 100.5\n");
        assert_eq!(parse_ground_truth(&text).unwrap(), gt);
        assert!(parse_ground_truth("GT 1 1\n1\nS 1 2\nT 1 1.0\n").is_err());
        assert_eq!(parse_ground_truth("GT 1 1\n1\nS 1 1\nT 1 0\n").unwrap_err().line, 4);
    }

    #[test]
    fn solution_round_trip() {
        let sol = Solution {
            segments: vec![0, 0, 1],
            classes: vec![1, 1, 0],
            segment_classes: vec![1, 0],
            objective: -0.1,
            grid: Some((1, 3)),
        };
        let text = serialize_solution(&sol);
        assert_eq!(text, "# grid 1 3\nSOL 2 -0.1\n1 2\n1 2\n2 1\nS 1 2\nS 2 1\n");
        assert_eq!(parse_solution(&text).unwrap(), sol);
        assert!(parse_solution("SOL 1 0\n1 1\nS 1 2\n").is_err());
    }

    #[test]
    fn model_round_trip() {
        let mut m = LinearCostModel::identity(2, 1, 0.3, 1.0 / 3.0);
        m.edge_bias = -1e-300;
        let text = serialize_model(&m);
        assert_eq!(parse_model(&text).unwrap(), m);
        assert!(parse_model("MODEL 1 1 1\nWV 1\nBV 0\nWE 1\n").is_err());
    }
}
