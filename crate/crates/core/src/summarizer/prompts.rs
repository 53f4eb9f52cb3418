//! Prompt catalog. The instruction texts ship as data files under
//! `data/prompts/` and are embedded at compile time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FACTS_SUMMARY: &str = include_str!("../../data/prompts/facts_summary.txt");
pub const SYLLABUS_SUMMARY: &str = include_str!("../../data/prompts/syllabus_summary.txt");
/// Contains a `{style}` placeholder.
pub const STYLE_TRANSFER: &str = include_str!("../../data/prompts/style_transfer.txt");

const STYLE_SLOT: &str = "{style}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    FactsSummary,
    SyllabusSummary,
    StyleTransfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputStyle {
    SeventhGrade,
    MicroblogThread,
    VideoComment,
}

impl OutputStyle {
    pub const ALL: [OutputStyle; 3] = [
        OutputStyle::SeventhGrade,
        OutputStyle::MicroblogThread,
        OutputStyle::VideoComment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutputStyle::SeventhGrade => "seventh_grade",
            OutputStyle::MicroblogThread => "microblog_thread",
            OutputStyle::VideoComment => "video_comment",
        }
    }

    /// Text substituted into the style-transfer instruction.
    pub fn slot_phrase(self) -> &'static str {
        match self {
            OutputStyle::SeventhGrade => "in 10 short paragraphs or fewer at a 7th-grade reading level",
            OutputStyle::MicroblogThread => "as a Twitter thread of 10 tweets or fewer",
            OutputStyle::VideoComment => "as a YouTube comment of 10 short paragraphs or fewer",
        }
    }
}

impl fmt::Display for OutputStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutputStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "seventh_grade" | "7th-grade" | "7th_grade" | "seventh-grade" | "essay" => {
                Ok(OutputStyle::SeventhGrade)
            }
            "microblog_thread" | "microblog-thread" | "twitter" | "thread" => {
                Ok(OutputStyle::MicroblogThread)
            }
            "video_comment" | "video-comment" | "youtube" | "comment" => {
                Ok(OutputStyle::VideoComment)
            }
            other => Err(format!("unknown output style `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: TemplateId,
    pub instruction_text: &'static str,
    pub style_slot: Option<OutputStyle>,
}

impl PromptTemplate {
    pub fn facts_summary() -> Self {
        PromptTemplate {
            template_id: TemplateId::FactsSummary,
            instruction_text: FACTS_SUMMARY,
            style_slot: None,
        }
    }

    pub fn syllabus_summary() -> Self {
        PromptTemplate {
            template_id: TemplateId::SyllabusSummary,
            instruction_text: SYLLABUS_SUMMARY,
            style_slot: None,
        }
    }

    pub fn style_transfer(style: OutputStyle) -> Self {
        PromptTemplate {
            template_id: TemplateId::StyleTransfer,
            instruction_text: STYLE_TRANSFER,
            style_slot: Some(style),
        }
    }

    /// Instruction with the style slot filled in.
    pub fn render(&self) -> String {
        match self.style_slot {
            Some(style) => self.instruction_text.replace(STYLE_SLOT, style.slot_phrase()),
            None => self.instruction_text.to_string(),
        }
    }
}

pub fn sha256_hex(data: &str) -> String {
    hex::encode(Sha256::digest(data.as_bytes()))
}
