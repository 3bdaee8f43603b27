//! Fixed prompt texts: GPT system prompts per job type, question templates,
//! yes/no answer phrasings and short-form suffixes.

/// System prompt for per-region detailed descriptions.
pub const DESCRIPTION_SYSTEM_PROMPT: &str = "You are an AI visual assistant that can analyze a single image. You receive a detailed description/several descriptions of this image. In addition, most object locations within the image are given, along with detailed coordinates. These coordinates are in the form of bounding boxes, represented as (x1, y1, x2, y2) with floating numbers ranging from 0 to 1.These values correspond to the top left x, top left y, bottom right x, and bottom right y.
Your role is to give a detailed description of each special region in the image. Instead of directly mentioning the bounding box coordinates, utilize this data to explain each region using natural language. Include details like object category, object type, object color, attributes of the object, object locations, object state and other attributes.
When using the information from the image and object region captions and coordinates, directly explain the region, and do not mention that the information source is the caption or the bounding box. Always answer as if you are directly looking at each region. Provide a direct answer without mention\"this region\". The answer template is: '<region1>: ...'";

/// System prompt for multi-turn region conversations.
pub const CONVERSATION_SYSTEM_PROMPT: &str = "You are an AI visual assistant, and you are seeing several object regions in a single image. What you see are provided with a detailed description for the whole image and each object region in this image, describing you are looking at. Answer all questions as you are seeing the image. The location of each object region is given in the form of bounding boxes, represented as (x1, y1, x2, y2) with floating numbers ranging from 0 to 1. These values correspond to the top left x, top left y, bottom right x, and bottom right y.
Design a conversation between you and a person asking about each object region of this image. The answers should be in a tone that a visual AI assistant is seeing the image and answering the question. Ask diverse questions and give corresponding answers. All the regions given should be mentioned in the questions, when referring to each region, use <region1>, <region2>, etc. Include questions asking about the visual content of each object region in the image, including the object category, object type, object color, object actions, object locations, relative positions between objects and other attributes, etc. Only include questions that have definite answers:
(1) one can see the content in the object region of this image that the question asks about and can answer confidently;
(2) one can determine confidently from the object region of this image that it is not in the image.
Do not ask any question that cannot be answered confidently. Also include complex questions that are relevant to the content of each object region in the image, for example, asking about background knowledge of the objects, asking to discuss about events happening in the image, etc. Again, do not ask about uncertain details.
Provide detailed answers when answering complex questions. For example, give detailed examples or reasoning steps to make the content more convincing and well-organized. You can include multiple paragraphs if necessary.";

/// System prompt for one-word / short-phrase answers.
pub const SHORT_FORM_SYSTEM_PROMPT: &str = "You are an AI visual assistant, and you are seeing several object regions in a single image. What you see are provided with a detailed description for the whole image and each object region in this image, describing you are looking at. Answer all questions as you are seeing the image. The location of each object region is given in the form of bounding boxes, represented as (x1, y1, x2, y2) with floating numbers ranging from 0 to 1. These values correspond to the top left x, top left y, bottom right x, and bottom right y.
Design a conversation between you and a person asking about each object region of this image. The answers must be in one word or one phrase. Ask diverse questions and give corresponding answers. All the regions given should be mentioned in the questions, when referring to each region, use <region1>, <region2>, etc. Include questions asking about the visual content of each object region in the image, including the object category, object type, object color, object actions, object locations, relative positions between objects and other attributes, etc. Only include questions that have definite answers:
(1) one can see the content in the object region of this image that the question asks about and can answer confidently;
(2) one can determine confidently from the object region of this image that it is not in the image.
Do not ask any question that cannot be answered confidently. Do not ask any question that is not mentioned. Do not ask any question that cannot be answered with one word or phrase.
Most importantly, the answer must be in one word or short phrase.";

/// System prompt for part-level attribute QA.
pub const PART_SYSTEM_PROMPT: &str = "You are an AI visual assistant that can analyze a single image. There are some regions in this image, each region is an object or a part of the object. You receive a short description with some words, separated by commas, for the common attributes of each region, which may contain category name, color, pattern & markings, material and reflectance etc. If a region is a part of an object, the category name is described as \u{201c}object:part\u{201d}, like \u{201c}person:body\u{201d}.
According to each description, design a conversation between you and a person asking about each region of this photo. The answers should be in a tone that a visual AI assistant is seeing the image and answering the question. Ask diverse questions and give corresponding answers.
Include diverse questions asking about the attributes of each region including category, part category, color, pattern & markings, material and reflectance. Each region must involve 1-2 questions, when referring to each region, use <region1>, <region2>, etc. Answer the question using as few words as possible (single or two words). Only include questions that have definite answers: one can see the content in the region of this image that the question asks about and can answer confidently.
Do not ask any question that cannot be answered confidently.";

/// Questions asking for a detailed description of one region. One entry has
/// no `<region>` marker; samplers skip it.
pub const DETAILED_DESCRIPTION_QUESTIONS: [&str; 30] = [
    "Can you provide me with a detailed description of the region in the picture marked by <region>?",
    "I'm curious about the region represented by <region> in the picture. Could you describe it in detail?",
    "What can you tell me about the region indicated by <region> in the image?",
    "I'd like to know more about the area in the photo labeled <region>. Can you give me a detailed description?",
    "Could you describe the region shown as <region> in the picture in great detail?",
    "What details can you give me about the region outlined by <region> in the photo?",
    "Please provide me with a comprehensive description of the region marked with <region> in the image.",
    "Can you give me a detailed account of the region labeled as <region> in the picture?",
    "I'm interested in learning more about the region represented by <region> in the photo. Can you describe it in detail?",
    "What is the region outlined by region in the picture like? Could you give me a detailed description?",
    "Can you provide me with a detailed description of the region in the picture marked by <region>, please?",
    "I'm curious about the region represented by <region> in the picture. Could you describe it in detail, please?",
    "What can you tell me about the region indicated by <region> in the image, exactly?",
    "I'd like to know more about the area in the photo labeled <region>, please. Can you give me a detailed description?",
    "Could you describe the region shown as <region> in the picture in great detail please?",
    "What details can you give me about the region outlined by <region> in the photo, please?",
    "Please provide me with a comprehensive description of the region marked with <region> in the image, please.",
    "Can you give me a detailed account of the region labeled as <region> in the picture, please?",
    "I'm interested in learning more about the region represented by <region> in the photo. Can you describe it in detail, please?",
    "What is the region outlined by <region> in the picture like, please? Could you give me a detailed description?",
    "Please describe the region <region> in the image in detail.",
    "Can you offer a thorough analysis of the region <region> in the image?",
    "Could you elaborate on the region highlighted by <region> in the picture provided?",
    "Please share more information about the zone emphasized with <region> in the photo.",
    "What insights can you give ablout the area denoted by <region> in the image presented?",
    "Can you share a comprehensive rundown of the region denoted by <region> in the presented image?",
    "I'd like to know more about the region highlighted by <region> in the picture provided.",
    "Work through the important details of the area <region> in the image.",
    "Illustrate the area represtented by <region> through a descriptive explanation.",
    "Examine the region <region> closely and share its details.",
];

/// Questions asking for a brief description of one region.
pub const BRIEF_DESCRIPTION_QUESTIONS: [&str; 30] = [
    "Please give me a short description of region <region>.",
    "Can you give me a short description of <region>? ",
    "Can you provide me with a short description of the region in the picture marked by <region>?",
    "I'm curious about the region represented by <region> in the picture. Could you describe it in few words?",
    "What can you tell me about the region indicated by <region> in the image in few words?",
    "I'd like to know more about the area in the photo labeled <region>. Can you give me a concise description?",
    "Could you describe the region shown as <region> in the picture concisely?",
    "What can you give me about the region outlined by <region> in the photo?",
    "Please provide me with a brief description of the region marked with <region> in the image.",
    "Can you give me a brief introduction of the region labeled as <region> in the picture?",
    "I'm interested in knowing the region represented by <region> in the photo. Can you describe it in several words?",
    "What is the region outlined by <region> in the picture like? Could you give me a streamlined description?",
    "Can you provide me with a brief description of the region in the picture marked by <region> please?",
    "I'm curious about the region represented by <region> in the picture. Could you describe it in few words please?",
    "What can you tell me about the region indicated by <region> in the image?",
    "I'd like to know more about the area in the photo labeled <region> please. Can you give me a simple description?",
    "Could you describe the region shown as <region> in the picture in several words?",
    "What attributes can you give me about the region outlined by <region> in the photo please?",
    "Please provide me with a simple description of the region marked with <region> in the image please.",
    "I'm interested in learning more about the region represented by <region> in the photo. Can you describe it in few words please?",
    "What is the region outlined by <region> in the picture like please? Could you give me a simple and clear description?",
    "Please describe the region <region> in the image concisely.",
    "Can you offer a simple analysis of the region <region> in the image?",
    "Could tell me something about the region highlighted by <region> in the picture briefly?",
    "Please share some information about the zone emphasized with <region> in the photo.",
    "What insights can you give ablout the area denoted by <region> in the image presented?",
    "Can you share a simple rundown of the region denoted by <region> in the presented image?",
    "I'd like to know some arrtributes about the region highlighted by <region> in the picture provided.",
    "Work through the important arrtributes of the area <region> in the image.",
    "Illustrate the area represtented by <region> with some important arrtributes.",
];

/// Yes/no category questions; `<category>` is substituted, `<region>` stays a marker.
pub const CATEGORY_QUESTIONS: [&str; 9] = [
    "<category> is the category of <region>, right?",
    "Is the category of <region> <category>?",
    "Dose this area <region> belong to category <category>?",
    "Is <category> the appropriate classification for this area <region>?",
    "Does category <category> accurately describe this region <region>?",
    "The category of <region> is <category>, right?",
    "Is this area <region> classified under category <category>?",
    "Is it correct to say this area <region> falls into category <category>?",
    "Is the classification of this region <region> aligned with category <category>?",
];

pub const CATEGORY_PLACEHOLDER: &str = "<category>";

pub const AFFIRMATIVE_ANSWERS: [&str; 1] = ["Yes, it is."];
pub const NEGATIVE_ANSWERS: [&str; 3] = ["No, it isn't.", "Not at all.", "This is not so."];

/// Short-form suffix for generated short-form questions.
pub const SHORT_PHRASE_SUFFIX: &str = " Using a short phrase.";
/// Short-form suffix used for category classification prompts.
pub const ONE_WORD_SUFFIX: &str = " Using only one word or phrase.";

/// Judge prompt; `{question}`, `{prediction}` and `{reference}` are filled in.
/// The judge must answer with the prediction's score first.
pub const DEFAULT_JUDGE_TEMPLATE: &str = "[Question]
{question}

[Assistant 1]
{prediction}
[End of Assistant 1]

[Assistant 2]
{reference}
[End of Assistant 2]

[System]
We would like to request your feedback on the performance of two AI assistants in response to the user question displayed above. The user asks about a specific region of the image.
Please rate the helpfulness, relevance, accuracy, level of details of their responses. Each assistant receives an overall score on a scale of 1 to 10, where a higher score indicates better overall performance.
Please first output a single line containing only two values indicating the scores for Assistant 1 and 2, respectively. The two scores are separated by a space.
In the subsequent line, please provide a comprehensive explanation of your evaluation, avoiding any potential bias and ensuring that the order in which the responses were presented does not affect your judgment.";
