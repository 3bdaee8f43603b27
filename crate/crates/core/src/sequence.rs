//! Interleaved image / text / region-placeholder sequences.
//!
//! Each `<region>` marker in a turn is replaced by a mask token immediately
//! followed by its spatial token, with no separator text between them.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};

pub const REGION_MARKER: &str = "<region>";
pub const IMAGE_MARKER: &str = "<image>";
pub const PREFIX_TEXT: &str = "\n This provides an overview of the picture.";
/// Joins the prefix to the first role header.
const PREFIX_SEPARATOR: &str = "\n";
const TURN_TERMINATOR: &str = "\n";

pub type RegionId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Text(String),
    Image,
    MaskToken(RegionId),
    SpatialToken(RegionId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Role {
    Human,
    Assistant,
}

impl Role {
    pub fn header(self) -> &'static str {
        match self {
            Role::Human => "Human: ",
            Role::Assistant => "Assistant: ",
        }
    }
}

/// One message. `bindings[k]` is the region bound to the k-th `<region>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Turn {
    pub role: Role,
    pub text: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub bindings: Vec<RegionId>,
}

impl Turn {
    pub fn new(role: Role, text: impl Into<String>, bindings: Vec<RegionId>) -> Self {
        Self {
            role,
            text: text.into(),
            bindings,
        }
    }

    pub fn marker_count(&self) -> usize {
        count_markers(&self.text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Conversation {
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn new(turns: Vec<Turn>) -> Self {
        Self { turns }
    }

    /// Roles alternate starting with the human, and every turn binds as many
    /// regions as it has markers.
    pub fn validate(&self) -> Result<()> {
        if self.turns.is_empty() {
            return Err(Error::MalformedConversation(String::from("no turns")));
        }
        for (i, turn) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::Human } else { Role::Assistant };
            if turn.role != expected {
                return Err(Error::MalformedConversation(alloc::format!(
                    "turn {i} is {:?}, expected {expected:?}",
                    turn.role
                )));
            }
            let markers = turn.marker_count();
            if markers != turn.bindings.len() {
                return Err(Error::BindingMismatch {
                    markers,
                    bindings: turn.bindings.len(),
                });
            }
        }
        Ok(())
    }

    /// Number of human/assistant exchanges.
    pub fn exchanges(&self) -> usize {
        self.turns.len().div_ceil(2)
    }

    pub fn region_ids(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.turns.iter().flat_map(|t| t.bindings.iter().copied())
    }
}

pub fn count_markers(text: &str) -> usize {
    text.matches(REGION_MARKER).count()
}

/// `[<image>, "\n This provides an overview of the picture."]`.
pub fn render_prefix() -> Vec<Segment> {
    alloc::vec![Segment::Image, Segment::Text(String::from(PREFIX_TEXT))]
}

/// Expands each `<region>` into its mask and spatial tokens.
pub fn substitute_regions(text: &str, bindings: &[RegionId]) -> Result<Vec<Segment>> {
    let markers = count_markers(text);
    if markers != bindings.len() {
        return Err(Error::BindingMismatch {
            markers,
            bindings: bindings.len(),
        });
    }
    let mut out = Vec::new();
    for (k, piece) in text.split(REGION_MARKER).enumerate() {
        if k > 0 {
            let id = bindings[k - 1];
            out.push(Segment::MaskToken(id));
            out.push(Segment::SpatialToken(id));
        }
        if !piece.is_empty() {
            out.push(Segment::Text(String::from(piece)));
        }
    }
    Ok(out)
}

/// Full sequence: optional prefix, then `"<Role>: <turn>\n"` per turn.
pub fn assemble_conversation(conv: &Conversation, with_prefix: bool) -> Result<Vec<Segment>> {
    conv.validate()?;
    let mut out = Vec::new();
    if with_prefix {
        out.extend(render_prefix());
        out.push(Segment::Text(String::from(PREFIX_SEPARATOR)));
    }
    for turn in &conv.turns {
        out.push(Segment::Text(String::from(turn.role.header())));
        out.extend(substitute_regions(&turn.text, &turn.bindings)?);
        out.push(Segment::Text(String::from(TURN_TERMINATOR)));
    }
    Ok(normalize(out))
}

/// The plain-text form [`assemble_conversation`] encodes, with `<image>` and
/// `<region>` markers left in place.
pub fn render_plain(conv: &Conversation, with_prefix: bool) -> String {
    let mut s = String::new();
    if with_prefix {
        s.push_str(IMAGE_MARKER);
        s.push_str(PREFIX_TEXT);
        s.push_str(PREFIX_SEPARATOR);
    }
    for turn in &conv.turns {
        s.push_str(turn.role.header());
        s.push_str(&turn.text);
        s.push_str(TURN_TERMINATOR);
    }
    s
}

/// Merges adjacent text segments and drops empty ones.
pub fn normalize(segments: Vec<Segment>) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for seg in segments {
        match (out.last_mut(), seg) {
            (_, Segment::Text(t)) if t.is_empty() => {}
            (Some(Segment::Text(prev)), Segment::Text(t)) => prev.push_str(&t),
            (_, seg) => out.push(seg),
        }
    }
    out
}

/// Inverse of substitution: text with `<image>` and `<region>` restored, and
/// the region ids in marker order.
pub fn reconstruct(segments: &[Segment]) -> (String, Vec<RegionId>) {
    let mut text = String::new();
    let mut ids = Vec::new();
    for seg in segments {
        match seg {
            Segment::Text(t) => text.push_str(t),
            Segment::Image => text.push_str(IMAGE_MARKER),
            Segment::MaskToken(id) => {
                text.push_str(REGION_MARKER);
                ids.push(*id);
            }
            Segment::SpatialToken(_) => {}
        }
    }
    (text, ids)
}

/// Debug rendering: `<image>`, `<mask:ID>`, `<pos:ID>` inline with the text.
pub fn render_debug(segments: &[Segment]) -> String {
    let mut s = String::new();
    for seg in segments {
        match seg {
            Segment::Text(t) => s.push_str(t),
            Segment::Image => s.push_str(IMAGE_MARKER),
            Segment::MaskToken(id) => {
                let _ = write!(s, "<mask:{id}>");
            }
            Segment::SpatialToken(id) => {
                let _ = write!(s, "<pos:{id}>");
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn text(s: &str) -> Segment {
        Segment::Text(String::from(s))
    }

    #[test]
    fn prefix_is_fixed() {
        let p = render_prefix();
        assert_eq!(p, vec![Segment::Image, text("\n This provides an overview of the picture.")]);
        assert_eq!(render_debug(&p), "<image>\n This provides an overview of the picture.");
        assert_eq!(render_prefix(), p);
    }

    #[test]
    fn single_marker() {
        let s = substitute_regions("region1 <region> is red", &[0]).unwrap();
        assert_eq!(
            s,
            vec![text("region1 "), Segment::MaskToken(0), Segment::SpatialToken(0), text(" is red")]
        );
    }

    #[test]
    fn no_marker_and_empty() {
        assert_eq!(substitute_regions("plain", &[]).unwrap(), vec![text("plain")]);
        assert!(substitute_regions("", &[]).unwrap().is_empty());
    }

    #[test]
    fn mismatch() {
        assert_eq!(
            substitute_regions("<region> and <region>", &[1]),
            Err(Error::BindingMismatch {
                markers: 2,
                bindings: 1
            })
        );
    }

    #[test]
    fn adjacent_markers_have_no_text_between() {
        let s = substitute_regions("<region><region>", &[4, 5]).unwrap();
        assert_eq!(render_debug(&s), "<mask:4><pos:4><mask:5><pos:5>");
    }

    #[test]
    fn assemble_counts() {
        let conv = Conversation::new(vec![Turn::new(Role::Human, "What is <region>?", vec![2])]);
        let seq = assemble_conversation(&conv, true).unwrap();
        let count = |f: fn(&Segment) -> bool| seq.iter().filter(|s| f(s)).count();
        assert_eq!(count(|s| matches!(s, Segment::Image)), 1);
        assert_eq!(count(|s| matches!(s, Segment::MaskToken(2))), 1);
        assert_eq!(count(|s| matches!(s, Segment::SpatialToken(2))), 1);
        assert_eq!(
            render_debug(&seq),
            "<image>\n This provides an overview of the picture.\nHuman: What is <mask:2><pos:2>?\n"
        );
    }

    #[test]
    fn assemble_preserves_region_order() {
        let conv = Conversation::new(vec![
            Turn::new(Role::Human, "Look at <region>.", vec![0]),
            Turn::new(Role::Assistant, "And <region> too.", vec![1]),
            Turn::new(Role::Human, "Back to <region>?", vec![0]),
        ]);
        let seq = assemble_conversation(&conv, false).unwrap();
        let ids: Vec<_> = seq
            .iter()
            .filter_map(|s| match s {
                Segment::MaskToken(i) => Some(*i),
                _ => None,
            })
            .collect();
        assert_eq!(ids, vec![0, 1, 0]);
    }

    #[test]
    fn assistant_first_is_malformed() {
        let conv = Conversation::new(vec![Turn::new(Role::Assistant, "hi", vec![])]);
        assert!(matches!(
            assemble_conversation(&conv, false),
            Err(Error::MalformedConversation(_))
        ));
        assert!(matches!(
            assemble_conversation(&Conversation::default(), false),
            Err(Error::MalformedConversation(_))
        ));
    }
}
