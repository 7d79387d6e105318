//! Panoptic quality, its smooth surrogate and the surrogate's gradient.
//!
//! The surrogate replaces threshold matching by a maximum-weight IoU
//! matching, weights each true positive by `h(IoU)` and every prediction by
//! a sigmoid of its area around the class threshold:
//!
//! ```text
//! PQ̄_l = Σ_TP h(u) σ(p) u / (Σ_TP h(u) σ(p) + ½ (Σ_FP σ(p) + |FN|))
//! ```
//!
//! Gradients are taken with respect to relaxed memberships `p(i, l)` of node
//! `i` in predicted segment `l`, holding the matching fixed.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{ClassId, CostGraph, GroundTruth, Labeling, SegmentId};
use crate::matching::{max_weight_assignment, threshold_assignment};

/// A panoptic labeling viewed as segment id per node plus class per segment.
#[derive(Debug, Clone, Copy)]
pub struct Panoptic<'a> {
    pub segments: &'a [SegmentId],
    pub segment_classes: &'a [ClassId],
}

impl<'a> From<&'a Labeling> for Panoptic<'a> {
    fn from(lab: &'a Labeling) -> Self {
        Self { segments: &lab.segments, segment_classes: &lab.segment_classes }
    }
}

impl<'a> From<&'a GroundTruth> for Panoptic<'a> {
    fn from(gt: &'a GroundTruth) -> Self {
        Self { segments: gt.segments(), segment_classes: gt.segment_classes() }
    }
}

impl Panoptic<'_> {
    fn check(&self) -> Result<()> {
        if self.segments.iter().any(|&s| s >= self.segment_classes.len()) {
            return Err(Error::Shape("segment id without a class"));
        }
        Ok(())
    }
}

/// `|p ∩ g| / |p ∪ g|` for binary masks; 0 when both are empty.
pub fn iou(p: &[bool], g: &[bool]) -> Result<f64> {
    if p.len() != g.len() {
        return Err(Error::Shape("mask lengths differ"));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in p.iter().zip(g) {
        inter += usize::from(a && b);
        union += usize::from(a || b);
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Areas and pairwise intersections between predicted and reference
/// segments, for hard or relaxed predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlaps {
    pred_area: Vec<f64>,
    gt_area: Vec<f64>,
    intersection: Vec<f64>,
}

impl Overlaps {
    pub fn from_labels(pred: &[SegmentId], num_pred: usize, gt: &[SegmentId], num_gt: usize) -> Result<Self> {
        if pred.len() != gt.len() {
            return Err(Error::Shape("prediction and ground truth node counts differ"));
        }
        let mut ov = Self {
            pred_area: vec![0.0; num_pred],
            gt_area: vec![0.0; num_gt],
            intersection: vec![0.0; num_pred * num_gt],
        };
        for (&p, &g) in pred.iter().zip(gt) {
            ov.pred_area[p] += 1.0;
            ov.gt_area[g] += 1.0;
            ov.intersection[p * num_gt + g] += 1.0;
        }
        Ok(ov)
    }

    /// `memberships` is row-major `nodes × num_pred`.
    pub fn from_memberships(memberships: &[f64], num_pred: usize, gt: &[SegmentId], num_gt: usize) -> Result<Self> {
        if memberships.len() != gt.len() * num_pred {
            return Err(Error::Shape("membership matrix shape"));
        }
        let mut ov = Self {
            pred_area: vec![0.0; num_pred],
            gt_area: vec![0.0; num_gt],
            intersection: vec![0.0; num_pred * num_gt],
        };
        for (i, &g) in gt.iter().enumerate() {
            ov.gt_area[g] += 1.0;
            for (l, &p) in memberships[i * num_pred..(i + 1) * num_pred].iter().enumerate() {
                ov.pred_area[l] += p;
                ov.intersection[l * num_gt + g] += p;
            }
        }
        Ok(ov)
    }

    pub fn pred_area(&self, l: SegmentId) -> f64 {
        self.pred_area[l]
    }

    pub fn gt_area(&self, g: SegmentId) -> f64 {
        self.gt_area[g]
    }

    pub fn intersection(&self, l: SegmentId, g: SegmentId) -> f64 {
        self.intersection[l * self.gt_area.len() + g]
    }

    pub fn union(&self, l: SegmentId, g: SegmentId) -> f64 {
        self.pred_area[l] + self.gt_area[g] - self.intersection(l, g)
    }

    pub fn iou(&self, l: SegmentId, g: SegmentId) -> f64 {
        let u = self.union(l, g);
        if u > 0.0 {
            self.intersection(l, g) / u
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// IoU ≥ 0.5 threshold matching.
    Hard,
    /// Maximum-weight bipartite matching on IoU.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub pred: SegmentId,
    pub gt: SegmentId,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMatches {
    pub class: ClassId,
    pub matched: Vec<MatchedPair>,
    pub false_positives: Vec<SegmentId>,
    pub false_negatives: Vec<SegmentId>,
}

/// Per-class matching for every class present in prediction or reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pub mode: MatchMode,
    pub classes: Vec<ClassMatches>,
}

impl MatchSet {
    pub fn class(&self, class: ClassId) -> Option<&ClassMatches> {
        self.classes.iter().find(|c| c.class == class)
    }
}

fn build_matches(
    ov: &Overlaps,
    pred_classes: &[ClassId],
    gt_classes: &[ClassId],
    mode: MatchMode,
) -> MatchSet {
    let num_classes = pred_classes.iter().chain(gt_classes).copied().max().map_or(0, |m| m + 1);
    let mut classes = Vec::new();
    for class in 0..num_classes {
        let preds: Vec<SegmentId> = (0..pred_classes.len())
            .filter(|&l| pred_classes[l] == class && ov.pred_area(l) > 0.0)
            .collect();
        let gts: Vec<SegmentId> = (0..gt_classes.len())
            .filter(|&g| gt_classes[g] == class && ov.gt_area(g) > 0.0)
            .collect();
        if preds.is_empty() && gts.is_empty() {
            continue;
        }
        let mut ious = Vec::with_capacity(preds.len() * gts.len());
        for &l in &preds {
            ious.extend(gts.iter().map(|&g| ov.iou(l, g)));
        }
        let assignment = match mode {
            MatchMode::Hard => threshold_assignment(&ious, preds.len(), gts.len()),
            MatchMode::Soft => max_weight_assignment(&ious, preds.len(), gts.len()),
        };
        let mut gt_taken = vec![false; gts.len()];
        let mut matched = Vec::new();
        let mut false_positives = Vec::new();
        for (r, &l) in preds.iter().enumerate() {
            match assignment[r] {
                Some(c) if ious[r * gts.len() + c] > 0.0 => {
                    gt_taken[c] = true;
                    matched.push(MatchedPair { pred: l, gt: gts[c], iou: ious[r * gts.len() + c] });
                }
                _ => false_positives.push(l),
            }
        }
        let false_negatives =
            gts.iter().zip(&gt_taken).filter(|(_, &t)| !t).map(|(&g, _)| g).collect();
        classes.push(ClassMatches { class, matched, false_positives, false_negatives });
    }
    MatchSet { mode, classes }
}

pub fn match_hard(pred: Panoptic<'_>, gt: Panoptic<'_>) -> Result<MatchSet> {
    pred.check()?;
    gt.check()?;
    let ov = Overlaps::from_labels(pred.segments, pred.segment_classes.len(), gt.segments, gt.segment_classes.len())?;
    Ok(build_matches(&ov, pred.segment_classes, gt.segment_classes, MatchMode::Hard))
}

pub fn match_soft(pred: Panoptic<'_>, gt: Panoptic<'_>) -> Result<MatchSet> {
    pred.check()?;
    gt.check()?;
    let ov = Overlaps::from_labels(pred.segments, pred.segment_classes.len(), gt.segments, gt.segment_classes.len())?;
    Ok(build_matches(&ov, pred.segment_classes, gt.segment_classes, MatchMode::Soft))
}

/// Soft matching on relaxed memberships.
pub fn match_soft_relaxed(
    memberships: &[f64],
    pred_classes: &[ClassId],
    gt: &GroundTruth,
) -> Result<MatchSet> {
    let ov = Overlaps::from_memberships(memberships, pred_classes.len(), gt.segments(), gt.segment_classes().len())?;
    Ok(build_matches(&ov, pred_classes, gt.segment_classes(), MatchMode::Soft))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassPq {
    pub class: ClassId,
    pub pq: f64,
    /// Mean IoU over true positives, 0 without any.
    pub sq: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqReport {
    pub classes: Vec<ClassPq>,
    /// Mean over classes present in prediction or reference.
    pub pq: f64,
}

/// Exact panoptic quality with IoU ≥ 0.5 matching.
pub fn pq_exact(pred: Panoptic<'_>, gt: &GroundTruth) -> Result<PqReport> {
    let matches = match_hard(pred, gt.into())?;
    let classes: Vec<ClassPq> = matches
        .classes
        .iter()
        .map(|c| {
            let tp = c.matched.len();
            let (fp, fn_) = (c.false_positives.len(), c.false_negatives.len());
            let iou_sum: f64 = c.matched.iter().map(|m| m.iou).sum();
            let pq = iou_sum / (tp as f64 + 0.5 * (fp + fn_) as f64);
            let sq = if tp > 0 { iou_sum / tp as f64 } else { 0.0 };
            ClassPq { class: c.class, pq, sq, tp, fp, fn_ }
        })
        .collect();
    let pq = mean(classes.iter().map(|c| c.pq));
    Ok(PqReport { classes, pq })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Soft IoU threshold `u⁴ / (u⁴ + (1 - u)⁴)`.
pub fn soft_threshold(u: f64) -> f64 {
    let a = u * u * u * u;
    let v = 1.0 - u;
    let b = v * v * v * v;
    if a + b == 0.0 {
        0.5
    } else {
        a / (a + b)
    }
}

fn soft_threshold_derivative(u: f64) -> f64 {
    let v = 1.0 - u;
    let (a, b) = (u * u * u * u, v * v * v * v);
    let d = a + b;
    if d == 0.0 {
        0.0
    } else {
        4.0 * u * u * u * v * v * v / (d * d)
    }
}

/// Smooth small-prediction rejection `1 / (1 + exp(-0.1 (area - t)))`.
pub fn area_sigmoid(area: f64, threshold: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-0.1 * (area - threshold)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateReport {
    pub classes: Vec<(ClassId, f64)>,
    pub value: f64,
}

struct ClassTerms {
    numerator: f64,
    denominator: f64,
}

fn class_terms(ov: &Overlaps, gt: &GroundTruth, c: &ClassMatches) -> ClassTerms {
    let t = gt.area_threshold(c.class);
    let mut numerator = 0.0;
    let mut weight = 0.0;
    for m in &c.matched {
        let u = ov.iou(m.pred, m.gt);
        let f = soft_threshold(u) * area_sigmoid(ov.pred_area(m.pred), t);
        numerator += f * u;
        weight += f;
    }
    let fp: f64 = c.false_positives.iter().map(|&l| area_sigmoid(ov.pred_area(l), t)).sum();
    let denominator = weight + 0.5 * (fp + c.false_negatives.len() as f64);
    ClassTerms { numerator, denominator }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 || den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn evaluate_surrogate(ov: &Overlaps, gt: &GroundTruth, matches: &MatchSet) -> Result<SurrogateReport> {
    if matches.classes.iter().any(|c| c.class >= gt.num_classes()) {
        return Err(Error::Shape("predicted class has no area threshold"));
    }
    let classes: Vec<(ClassId, f64)> = matches
        .classes
        .iter()
        .map(|c| {
            let terms = class_terms(ov, gt, c);
            (c.class, ratio(terms.numerator, terms.denominator))
        })
        .collect();
    let value = mean(classes.iter().map(|c| c.1));
    Ok(SurrogateReport { classes, value })
}

/// Surrogate PQ of a hard prediction with the soft matching it induces.
pub fn pq_surrogate(pred: Panoptic<'_>, gt: &GroundTruth) -> Result<(SurrogateReport, MatchSet)> {
    pred.check()?;
    let ov = Overlaps::from_labels(pred.segments, pred.segment_classes.len(), gt.segments(), gt.segment_classes().len())?;
    let matches = build_matches(&ov, pred.segment_classes, gt.segment_classes(), MatchMode::Soft);
    let report = evaluate_surrogate(&ov, gt, &matches)?;
    Ok((report, matches))
}

/// Surrogate PQ of relaxed memberships under a fixed matching.
pub fn pq_surrogate_relaxed(
    memberships: &[f64],
    num_pred: usize,
    gt: &GroundTruth,
    matches: &MatchSet,
) -> Result<f64> {
    let ov = Overlaps::from_memberships(memberships, num_pred, gt.segments(), gt.segment_classes().len())?;
    Ok(evaluate_surrogate(&ov, gt, matches)?.value)
}

/// `∂L/∂p(i, l)` for node `i` and predicted segment `l`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGradient {
    num_nodes: usize,
    num_segments: usize,
    values: Vec<f64>,
}

impl SegmentGradient {
    pub fn zeros(num_nodes: usize, num_segments: usize) -> Self {
        Self { num_nodes, num_segments, values: vec![0.0; num_nodes * num_segments] }
    }

    pub fn from_values(num_nodes: usize, num_segments: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_nodes * num_segments {
            return Err(Error::Shape("segment gradient shape"));
        }
        Ok(Self { num_nodes, num_segments, values })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    pub fn get(&self, node: usize, segment: SegmentId) -> f64 {
        self.values[node * self.num_segments + segment]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Gradient of `weight · (1 - mean PQ̄)` at relaxed memberships.
pub fn pq_surrogate_grad_relaxed(
    memberships: &[f64],
    num_pred: usize,
    gt: &GroundTruth,
    matches: &MatchSet,
    weight: f64,
) -> Result<SegmentGradient> {
    surrogate_grad_impl(memberships, num_pred, gt, matches, weight, false)
}

/// Same as `pq_surrogate_grad_relaxed` with the sign of `∂IoU/∂p` flipped.
/// Only exists so gradient checks can prove they catch such a bug.
#[doc(hidden)]
pub fn pq_surrogate_grad_relaxed_sign_flipped(
    memberships: &[f64],
    num_pred: usize,
    gt: &GroundTruth,
    matches: &MatchSet,
    weight: f64,
) -> Result<SegmentGradient> {
    surrogate_grad_impl(memberships, num_pred, gt, matches, weight, true)
}

fn surrogate_grad_impl(
    memberships: &[f64],
    num_pred: usize,
    gt: &GroundTruth,
    matches: &MatchSet,
    weight: f64,
    flip_iou: bool,
) -> Result<SegmentGradient> {
    let ov = Overlaps::from_memberships(memberships, num_pred, gt.segments(), gt.segment_classes().len())?;
    let n = gt.num_nodes();
    let mut grad = SegmentGradient::zeros(n, num_pred);
    let active = matches.classes.len();
    if active == 0 || weight == 0.0 {
        return Ok(grad);
    }
    let scale = -weight / active as f64;
    let gt_seg = gt.segments();

    for c in &matches.classes {
        if c.class >= gt.num_classes() {
            return Err(Error::Shape("predicted class has no area threshold"));
        }
        let t = gt.area_threshold(c.class);
        let terms = class_terms(&ov, gt, c);
        let (num, den) = (terms.numerator, terms.denominator);
        if den == 0.0 {
            continue;
        }
        // d(num/den) = (dnum·den - num·dden) / den²
        let d_ratio = |dnum: f64, dden: f64| scale * (dnum * den - num * dden) / (den * den);

        for m in &c.matched {
            let l = m.pred;
            let inter = ov.intersection(l, m.gt);
            let union = ov.union(l, m.gt);
            let u = ov.iou(l, m.gt);
            let h = soft_threshold(u);
            let dh = soft_threshold_derivative(u);
            let s = area_sigmoid(ov.pred_area(l), t);
            let ds = 0.1 * s * (1.0 - s);
            let sign = if flip_iou { -1.0 } else { 1.0 };
            // inside the matched reference mask / outside it
            let du_in = sign / union;
            let du_out = -sign * inter / (union * union);
            let entry = |du: f64| {
                let dnum = dh * du * s * u + h * ds * u + h * s * du;
                let dden = dh * du * s + h * ds;
                d_ratio(dnum, dden)
            };
            let (g_in, g_out) = (entry(du_in), entry(du_out));
            for i in 0..n {
                grad.values[i * num_pred + l] = if gt_seg[i] == m.gt { g_in } else { g_out };
            }
        }
        for &l in &c.false_positives {
            let s = area_sigmoid(ov.pred_area(l), t);
            let g = d_ratio(0.0, 0.5 * 0.1 * s * (1.0 - s));
            for i in 0..n {
                grad.values[i * num_pred + l] = g;
            }
        }
    }
    Ok(grad)
}

/// One-hot memberships of a hard prediction, row-major `nodes × segments`.
pub fn one_hot_memberships(segments: &[SegmentId], num_segments: usize) -> Vec<f64> {
    let mut m = vec![0.0; segments.len() * num_segments];
    for (i, &s) in segments.iter().enumerate() {
        m[i * num_segments + s] = 1.0;
    }
    m
}

/// Gradient of `weight · (1 - mean PQ̄)` at a hard prediction, matching fixed.
pub fn pq_surrogate_grad(
    pred: Panoptic<'_>,
    gt: &GroundTruth,
    matches: &MatchSet,
    weight: f64,
) -> Result<SegmentGradient> {
    pred.check()?;
    let num_pred = pred.segment_classes.len();
    let memberships = one_hot_memberships(pred.segments, num_pred);
    pq_surrogate_grad_relaxed(&memberships, num_pred, gt, matches, weight)
}

/// Ranking score of an instance: mean node cost of `class` over the mask,
/// plus the mean cost of edges leaving the mask, minus the mean cost of
/// edges inside it. An empty edge set contributes 0.
pub fn instance_score(mask: &[bool], class: ClassId, g: &CostGraph) -> Result<f64> {
    if mask.len() != g.num_nodes() {
        return Err(Error::Shape("mask length"));
    }
    if class >= g.num_classes() {
        return Err(Error::Shape("class out of range"));
    }
    let size = mask.iter().filter(|&&m| m).count();
    if size == 0 {
        return Err(Error::Shape("empty mask"));
    }
    let node_mean: f64 = (0..g.num_nodes())
        .filter(|&i| mask[i])
        .map(|i| g.node_cost(i, class))
        .sum::<f64>()
        / size as f64;
    let (mut boundary, mut nb, mut internal, mut ni) = (0.0, 0usize, 0.0, 0usize);
    for (&(i, j), &c) in g.edges().iter().zip(g.edge_costs()) {
        match (mask[i], mask[j]) {
            (true, true) => {
                internal += c;
                ni += 1;
            }
            (true, false) | (false, true) => {
                boundary += c;
                nb += 1;
            }
            (false, false) => {}
        }
    }
    let avg = |s: f64, k: usize| if k == 0 { 0.0 } else { s / k as f64 };
    Ok(node_mean + avg(boundary, nb) - avg(internal, ni))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// 16 nodes: reference segment 0 = nodes 0..10 (class 0), segment 1 = rest (class 1).
    fn gt_two_segments(thresholds: [f64; 2]) -> GroundTruth {
        let segs: Vec<usize> = (0..16).map(|i| usize::from(i >= 10)).collect();
        GroundTruth::new(segs, vec![0, 1], thresholds.to_vec()).unwrap()
    }

    #[test]
    fn iou_examples() {
        let p = [true, true, false];
        assert_eq!(iou(&p, &p).unwrap(), 1.0);
        assert_eq!(iou(&[true, false], &[false, true]).unwrap(), 0.0);
        let mut p = [false; 10];
        let g = [true; 10];
        p[..6].iter_mut().for_each(|x| *x = true);
        assert!(close(iou(&p, &g).unwrap(), 0.6, 1e-15));
        assert!(iou(&[true], &[true, false]).is_err());
        assert_eq!(iou(&[false, false], &[true, false]).unwrap(), 0.0);
    }

    #[test]
    fn hard_matching_examples() {
        let gt = gt_two_segments([1.0, 1.0]);
        let perfect = match_hard(Panoptic::from(&gt), Panoptic::from(&gt)).unwrap();
        for c in &perfect.classes {
            assert_eq!(c.matched.len(), 1);
            assert_eq!(c.matched[0].iou, 1.0);
            assert!(c.false_positives.is_empty() && c.false_negatives.is_empty());
        }

        let empty = match_hard(Panoptic { segments: &[], segment_classes: &[] }, Panoptic { segments: &[], segment_classes: &[] }).unwrap();
        assert!(empty.classes.is_empty());

        // one prediction of 10 nodes overlapping gt A (6 of 7 nodes) and gt B (4 of 13)
        // IoU(A) = 6 / 11 ≈ 0.545, IoU(B) = 4 / 19 ≈ 0.21
        let gt_segs: Vec<usize> = (0..20).map(|i| usize::from(i >= 7)).collect();
        let gt = GroundTruth::new(gt_segs, vec![0, 0], vec![1.0]).unwrap();
        let pred_segs: Vec<usize> = (0..20).map(|i| usize::from(!(1..11).contains(&i))).collect();
        let m = match_hard(Panoptic { segments: &pred_segs, segment_classes: &[0, 0] }, (&gt).into()).unwrap();
        let c = m.class(0).unwrap();
        assert!(c.matched.iter().any(|p| p.pred == 0 && p.gt == 0));
        assert!(c.matched.iter().all(|p| p.iou >= 0.5));
    }

    #[test]
    fn exact_pq_examples() {
        let gt = gt_two_segments([1.0, 1.0]);
        assert_eq!(pq_exact(Panoptic::from(&gt), &gt).unwrap().pq, 1.0);

        // prediction: 6 nodes of class 0 inside a 10-node gt; the other nodes
        // belong to a class-1 segment that mismatches nothing extra.
        let gt = GroundTruth::new(vec![0; 10], vec![0], vec![1.0, 1.0]).unwrap();
        let segs: Vec<usize> = (0..10).map(|i| usize::from(i >= 6)).collect();
        let pred = Panoptic { segments: &segs, segment_classes: &[0, 1] };
        let report = pq_exact(pred, &gt).unwrap();
        let c0 = report.classes.iter().find(|c| c.class == 0).unwrap();
        assert!(close(c0.pq, 0.6, 1e-12));
        let c1 = report.classes.iter().find(|c| c.class == 1).unwrap();
        assert_eq!((c1.pq, c1.fp), (0.0, 1));
    }

    #[test]
    fn exact_pq_without_predictions_for_a_class() {
        let gt = gt_two_segments([1.0, 1.0]);
        let segs = vec![0; 16];
        let report = pq_exact(Panoptic { segments: &segs, segment_classes: &[0] }, &gt).unwrap();
        let c1 = report.classes.iter().find(|c| c.class == 1).unwrap();
        assert_eq!((c1.pq, c1.fn_), (0.0, 1));
    }

    #[test]
    fn soft_matching_ignores_threshold() {
        // one pred, one gt, IoU 0.3: 3 shared nodes, 10 in the union
        let gt_segs: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        let gt = GroundTruth::new(gt_segs, vec![0, 1], vec![1.0, 1.0]).unwrap();
        let pred_segs: Vec<usize> = (0..10).map(|i| usize::from(!(2..10).contains(&i) || i >= 8)).collect();
        // pred 0 = nodes 2..8 of class 0 (3 in gt 0) -> IoU 3 / 8
        let m = match_soft(Panoptic { segments: &pred_segs, segment_classes: &[0, 1] }, (&gt).into()).unwrap();
        let c = m.class(0).unwrap();
        assert_eq!(c.matched.len(), 1);
        assert!(c.matched[0].iou < 0.5);
        let hard = match_hard(Panoptic { segments: &pred_segs, segment_classes: &[0, 1] }, (&gt).into()).unwrap();
        assert!(hard.class(0).unwrap().matched.is_empty());
    }

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(0.5), 0.5);
        assert_eq!(soft_threshold(0.0), 0.0);
        assert_eq!(soft_threshold(1.0), 1.0);
        assert!(close(soft_threshold(0.9), 0.6561 / 0.6562, 1e-12));
        assert!(close(soft_threshold(0.9), 0.999848, 1e-6));
    }

    #[test]
    fn area_sigmoid_values() {
        assert_eq!(area_sigmoid(200.0, 200.0), 0.5);
        assert!(close(area_sigmoid(300.0, 200.0), 0.9999546, 1e-7));
        assert!(close(area_sigmoid(0.0, 200.0), 2.06e-9, 1e-11));
    }

    #[test]
    fn surrogate_single_pair() {
        // prediction covers all 10 nodes, the class-0 reference covers 6:
        // IoU 0.6, predicted area 10 = threshold so σ = 0.5
        let gt_segs: Vec<usize> = (0..10).map(|i| usize::from(i >= 6)).collect();
        let gt = GroundTruth::new(gt_segs, vec![0, 1], vec![10.0, 1.0]).unwrap();
        let pred_segs = vec![0; 10];
        let pred = Panoptic { segments: &pred_segs, segment_classes: &[0] };
        let (report, m) = pq_surrogate(pred, &gt).unwrap();
        let c0 = report.classes.iter().find(|c| c.0 == 0).unwrap().1;
        assert!(close(c0, 0.6, 1e-12));
        assert_eq!(m.mode, MatchMode::Soft);
        assert!(close(soft_threshold(0.6), 0.1296 / 0.1552, 1e-12));
    }

    #[test]
    fn surrogate_bounds_and_empty_prediction() {
        let gt = gt_two_segments([1.0, 1.0]);
        let (r, _) = pq_surrogate(Panoptic::from(&gt), &gt).unwrap();
        assert!(r.value > 0.99 && r.value <= 1.0);
        let segs = vec![0; 16];
        let gt1 = GroundTruth::new(vec![0; 16], vec![0], vec![1.0, 1.0]).unwrap();
        let (r, _) = pq_surrogate(Panoptic { segments: &segs, segment_classes: &[1] }, &gt1).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn perfect_single_segment_gradient_is_iou_path_only() {
        // one class, one segment covering everything: PQ̄ = IoU, so
        // ∂L/∂p(i) = -w ∂IoU/∂p(i) = -w / U for nodes in the mask.
        let gt = GroundTruth::new(vec![0; 8], vec![0], vec![3.0]).unwrap();
        let (_, m) = pq_surrogate(Panoptic::from(&gt), &gt).unwrap();
        let g = pq_surrogate_grad(Panoptic::from(&gt), &gt, &m, 2.0).unwrap();
        for i in 0..8 {
            assert!(close(g.get(i, 0), -2.0 / 8.0, 1e-12), "{}", g.get(i, 0));
        }
    }

    #[test]
    fn false_positive_gradient_is_positive() {
        // class 0: gt nodes 0..6, pred A = 0..6 (TP), pred B = 6..8 (FP of class 0)
        let gt = GroundTruth::new((0..8).map(|i| usize::from(i >= 6)).collect(), vec![0, 1], vec![4.0, 4.0]).unwrap();
        let segs: Vec<usize> = (0..8).map(|i| usize::from(i >= 6)).collect();
        let pred = Panoptic { segments: &segs, segment_classes: &[0, 0] };
        let (_, m) = pq_surrogate(pred, &gt).unwrap();
        assert_eq!(m.class(0).unwrap().false_positives, vec![1]);
        let g = pq_surrogate_grad(pred, &gt, &m, 10.0).unwrap();
        for i in 0..8 {
            assert!(g.get(i, 1) > 0.0);
        }
        let zero = pq_surrogate_grad(pred, &gt, &m, 0.0).unwrap();
        assert!(zero.is_zero());
    }

    #[test]
    fn instance_score_examples() {
        let g = CostGraph::new(2, 1, vec![(0, 1)], vec![0.0, 0.0], vec![4.0], &[0]).unwrap();
        assert_eq!(instance_score(&[true, false], 0, &g).unwrap(), 4.0);

        let g = CostGraph::new(3, 2, vec![(0, 1), (1, 2)], vec![1.0, 9.0, 3.0, 9.0, 5.0, 9.0], vec![0.0; 2], &[0]).unwrap();
        assert_eq!(instance_score(&[true, true, false], 0, &g).unwrap(), 2.0);

        let g = CostGraph::new(3, 1, vec![(0, 1), (1, 2)], vec![0.0; 3], vec![2.5, 2.5], &[0]).unwrap();
        assert_eq!(instance_score(&[true, true, false], 0, &g).unwrap(), 0.0);
        assert!(instance_score(&[false; 3], 0, &g).is_err());
    }
}
