use serde::{Deserialize, Serialize};

/// Three-valued outcome shared by the criterion, ODE and PDE paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Verdict {
    /// Finite-time blow-up. `t_star` is `None` for criterion-level verdicts.
    BlowUp { t_star: Option<f64> },
    /// Global existence, optionally with the observed decay exponent of the
    /// sup-norm (`x(t) ~ t^-decay_exponent`).
    Global { decay_exponent: Option<f64> },
    /// Budget or tolerance exhausted before either outcome could be certified.
    Undetermined { reason: String },
}

/// Coarse classification used for agreement matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    BlowUp,
    Global,
    Undetermined,
}

impl Verdict {
    pub fn blow_up(t_star: Option<f64>) -> Self {
        Verdict::BlowUp { t_star }
    }

    pub fn global(decay_exponent: Option<f64>) -> Self {
        Verdict::Global { decay_exponent }
    }

    pub fn undetermined(reason: impl Into<String>) -> Self {
        Verdict::Undetermined { reason: reason.into() }
    }

    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::BlowUp { .. } => VerdictKind::BlowUp,
            Verdict::Global { .. } => VerdictKind::Global,
            Verdict::Undetermined { .. } => VerdictKind::Undetermined,
        }
    }

    pub fn is_blow_up(&self) -> bool {
        matches!(self, Verdict::BlowUp { .. })
    }

    pub fn is_global(&self) -> bool {
        matches!(self, Verdict::Global { .. })
    }

    pub fn is_determined(&self) -> bool {
        !matches!(self, Verdict::Undetermined { .. })
    }

    pub fn t_star(&self) -> Option<f64> {
        match self {
            Verdict::BlowUp { t_star } => *t_star,
            _ => None,
        }
    }

    pub fn decay_exponent(&self) -> Option<f64> {
        match self {
            Verdict::Global { decay_exponent } => *decay_exponent,
            _ => None,
        }
    }

    /// Two verdicts disagree only when both are determined and differ.
    pub fn conflicts_with(&self, other: &Verdict) -> bool {
        self.is_determined() && other.is_determined() && self.kind() != other.kind()
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::BlowUp { t_star: Some(t) } => write!(f, "BlowUp(t*={t:.6e})"),
            Verdict::BlowUp { t_star: None } => write!(f, "BlowUp"),
            Verdict::Global {
                decay_exponent: Some(d),
            } => write!(f, "Global(decay={d:.4})"),
            Verdict::Global { decay_exponent: None } => write!(f, "Global"),
            Verdict::Undetermined { reason } => write!(f, "Undetermined({reason})"),
        }
    }
}

/// Aggregates per-sample verdicts into a property verdict: a single global
/// sample falsifies the blow-up property, an undetermined sample blocks a
/// blow-up claim.
pub fn aggregate_property<'a>(verdicts: impl IntoIterator<Item = &'a Verdict>) -> Verdict {
    let mut any_undetermined = None;
    let mut count = 0usize;
    for v in verdicts {
        count += 1;
        match v {
            Verdict::Global { .. } => return Verdict::global(None),
            Verdict::Undetermined { reason } if any_undetermined.is_none() => {
                any_undetermined = Some(reason.clone());
            }
            _ => {}
        }
    }
    if count == 0 {
        return Verdict::undetermined("empty sample");
    }
    match any_undetermined {
        Some(reason) => Verdict::undetermined(format!("sample run undetermined: {reason}")),
        None => Verdict::blow_up(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_rules() {
        let b = Verdict::blow_up(Some(1.0));
        let g = Verdict::global(Some(0.5));
        let u = Verdict::undetermined("budget");
        assert!(aggregate_property([&b, &b]).is_blow_up());
        assert!(aggregate_property([&b, &u, &g]).is_global());
        assert_eq!(aggregate_property([&b, &u]).kind(), VerdictKind::Undetermined);
        assert!(!aggregate_property(std::iter::empty()).is_determined());
    }

    #[test]
    fn conflicts_only_between_determined() {
        let b = Verdict::blow_up(None);
        let g = Verdict::global(None);
        let u = Verdict::undetermined("x");
        assert!(b.conflicts_with(&g));
        assert!(!b.conflicts_with(&u));
        assert!(!u.conflicts_with(&g));
    }

    #[test]
    fn serde_shape() {
        let s = serde_json::to_string(&Verdict::blow_up(None)).unwrap();
        assert_eq!(s, r#"{"outcome":"blow_up","t_star":null}"#);
    }
}
