//! Built-in in-context examples: a three-person market scene for object-level
//! jobs and a spoon-and-bowl scene for part-level jobs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::attributes::PartAttributes;
use super::{BoxEntry, ImageContext, RegionAnnotation};
use crate::mask::RleMask;

pub const MARKET_DESCRIPTION_RESPONSE: &str = include_str!("../../fixtures/market_description.txt");
pub const MARKET_CONVERSATION_RESPONSE: &str = include_str!("../../fixtures/market_conversation.txt");
pub const MARKET_SHORT_FORM_RESPONSE: &str = include_str!("../../fixtures/market_short_form.txt");
pub const PART_QA_RESPONSE: &str = include_str!("../../fixtures/spoon_bowl_part_qa.txt");

const MARKET_DESCRIPTION: &str = "The image presents a lively market scene with a group of people buying fruits and bags. There are multiple individuals in the market, all browsing through the fresh produce available. A significant variety of fruits are showcased in the market, including bananas, oranges, and apples. Bananas can be seen in several groups, with some green and yellow bananas occupying different areas of the market. Meanwhile, oranges and apples are displayed in smaller sections among the fruits. In addition to fruits, handbags are also being sold at the market, attracting the attention of the customers. Overall, the market bustles with activity as people gather around the fresh fruits and bags, contemplating their purchases.";

const MARKET_BOXES: [(&str, [f64; 4]); 15] = [
    ("person", [0.507, 0.409, 0.698, 0.740]),
    ("person", [0.243, 0.496, 0.558, 0.746]),
    ("person", [0.196, 0.422, 0.395, 0.708]),
    ("orange", [0.761, 0.537, 0.820, 0.569]),
    ("orange", [0.809, 0.553, 0.841, 0.570]),
    ("orange", [0.841, 0.552, 0.868, 0.571]),
    ("banana", [0.671, 0.814, 0.770, 0.887]),
    ("banana", [0.599, 0.703, 0.820, 0.817]),
    ("banana", [0.885, 0.829, 0.941, 0.893]),
    ("apple", [0.811, 0.584, 0.851, 0.603]),
    ("apple", [0.873, 0.568, 0.900, 0.586]),
    ("apple", [0.778, 0.580, 0.819, 0.601]),
    ("handbag", [0.473, 0.110, 0.607, 0.201]),
    ("handbag", [0.491, 0.202, 0.611, 0.267]),
    ("handbag", [0.583, 0.105, 0.696, 0.204]),
];

const MARKET_CAPTIONS: [&[&str]; 3] = [
    &[
        "gray shirt wearing glasses.",
        "woman with gray shirt standing next to man.",
        "woman in gray shirt facing camera on right.",
        "the woman in the grey shirt with a watch on her wrist.",
        "a short haired woman in jeans shopping.",
    ],
    &[
        "the lady with the blue shirt.",
        "the back of an older woman with her hair in a barrette with a blue jacket on.",
        "navy blue shirt.",
        "woman back in blue.",
        "a woman is wearing blue sweater.",
    ],
    &[
        "a woman in glasses shops in an open air fruit market.",
        "a woman in a gray coat and scarf.",
    ],
];

fn placeholder_mask() -> RleMask {
    RleMask {
        height: 1,
        width: 1,
        counts: vec![1],
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| String::from(*s)).collect()
}

/// The market scene; regions 1–3 are the three captioned people.
pub fn market_context() -> ImageContext {
    let boxes = MARKET_BOXES
        .iter()
        .map(|(c, b)| BoxEntry {
            category: String::from(*c),
            bbox_norm: *b,
        })
        .collect();
    let regions = MARKET_CAPTIONS
        .iter()
        .enumerate()
        .map(|(i, caps)| {
            RegionAnnotation::new(i as u32 + 1, "person", placeholder_mask(), MARKET_BOXES[i].1)
                .with_captions(strings(caps))
        })
        .collect();
    ImageContext {
        image_ref: String::from("fewshot/market"),
        description: String::from(MARKET_DESCRIPTION),
        boxes,
        regions,
    }
}

const PART_REGIONS: [(&str, [&str; 4]); 8] = [
    ("spoon", ["dark grey", "plain", "metal", "opaque"]),
    ("bowl", ["dark green", "plain", "ceramic", "opaque"]),
    ("spoon:tip", ["dark grey", "plain", "metal", "opaque"]),
    ("spoon:bowl", ["light grey", "plain", "metal", "opaque"]),
    ("spoon:neck", ["dark grey", "plain", "metal", "opaque"]),
    ("spoon:handle", ["dark grey", "plain", "metal", "opaque"]),
    ("bowl:inner body", ["dark green", "plain", "ceramic", "opaque"]),
    ("bowl:rim", ["dark green", "plain", "ceramic", "opaque"]),
];

/// The spoon-and-bowl scene with eight object and part regions.
pub fn part_context() -> ImageContext {
    let regions = PART_REGIONS
        .iter()
        .enumerate()
        .map(|(i, (cat, attrs))| {
            let attrs = PartAttributes::from_flat(attrs).expect("built-in attributes are valid");
            RegionAnnotation::new(i as u32 + 1, *cat, placeholder_mask(), [0.0, 0.0, 1.0, 1.0])
                .with_attributes(attrs)
        })
        .collect();
    ImageContext {
        image_ref: String::from("fewshot/spoon_bowl"),
        description: String::new(),
        boxes: Vec::new(),
        regions,
    }
}
