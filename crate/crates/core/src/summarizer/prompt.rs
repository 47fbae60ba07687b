use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SummarizerError;

/// Placeholder substituted with the note text.
pub const NOTE_PLACEHOLDER: &str = "{note}";

/// The three summary aspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Plain,
    Riskfactor,
    Timeline,
}

impl Aspect {
    /// Fixed order used for merging and union construction.
    pub const ALL: [Aspect; 3] = [Aspect::Plain, Aspect::Riskfactor, Aspect::Timeline];

    pub fn as_str(self) -> &'static str {
        match self {
            Aspect::Plain => "plain",
            Aspect::Riskfactor => "riskfactor",
            Aspect::Timeline => "timeline",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aspect {
    type Err = SummarizerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(Aspect::Plain),
            "riskfactor" => Ok(Aspect::Riskfactor),
            "timeline" => Ok(Aspect::Timeline),
            other => Err(SummarizerError::UnknownAspect(other.to_string())),
        }
    }
}

pub const SYSTEM_MESSAGE: &str =
    "You are a clinical documentation assistant. You write faithful, concise summaries of \
     psychiatric discharge notes and never invent facts that are not in the note.";

const PLAIN_TEMPLATE: &str = "Summarize the following psychiatric discharge note in one \
paragraph of fewer than 512 words. Describe the reason for admission, the hospital course, \
and the condition and plan at discharge.\n\nDischarge note:\n{note}\n\nSummary:";

const RISKFACTOR_TEMPLATE: &str = "Summarize the following psychiatric discharge note in one \
paragraph of fewer than 512 words, focusing on the patient's risk factors for psychiatric \
readmission: appearance, mood, thought content, thought process, substance use, suicidality \
and self-harm, interpersonal relationships, occupation, housing, medication adherence, and \
prior hospitalizations. Mention each risk factor that the note documents.\n\nDischarge \
note:\n{note}\n\nRisk factor summary:";

const TIMELINE_TEMPLATE: &str = "Summarize the following psychiatric discharge note as a \
timeline in one paragraph of fewer than 512 words. List the important events before and \
during the admission in the order in which they happened, from the earliest to the \
discharge.\n\nDischarge note:\n{note}\n\nTimeline summary:";

/// Prompt used for zero-shot outcome prediction; asks for a binary answer.
pub const ZERO_SHOT_TEMPLATE: &str = "Read the following psychiatric discharge note. Will this \
patient be readmitted to a psychiatric hospital within 30 days of discharge? Answer with a \
single word, Yes or No.\n\nDischarge note:\n{note}\n\nAnswer:";

/// An aspect-tagged template with exactly one note placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectPrompt {
    aspect: Aspect,
    template: String,
}

impl AspectPrompt {
    pub fn new(aspect: Aspect, template: impl Into<String>) -> Result<Self, SummarizerError> {
        let template = template.into();
        check_template(&template)?;
        Ok(Self { aspect, template })
    }

    /// The shipped template for an aspect.
    pub fn shipped(aspect: Aspect) -> Self {
        let template = match aspect {
            Aspect::Plain => PLAIN_TEMPLATE,
            Aspect::Riskfactor => RISKFACTOR_TEMPLATE,
            Aspect::Timeline => TIMELINE_TEMPLATE,
        };
        Self {
            aspect,
            template: template.to_string(),
        }
    }

    pub fn aspect(&self) -> Aspect {
        self.aspect
    }

    pub fn template(&self) -> &str {
        &self.template
    }
}

pub(crate) fn check_template(template: &str) -> Result<(), SummarizerError> {
    let n = template.matches(NOTE_PLACEHOLDER).count();
    if n != 1 {
        return Err(SummarizerError::BadTemplate(n));
    }
    Ok(())
}

/// Substitutes the note into a template in a single pass. Placeholder text
/// occurring inside the note is left untouched.
pub fn render_template(template: &str, note_text: &str) -> Result<String, SummarizerError> {
    if note_text.is_empty() {
        return Err(SummarizerError::EmptyNote);
    }
    check_template(template)?;
    let (head, tail) = template
        .split_once(NOTE_PLACEHOLDER)
        .expect("placeholder count checked");
    let mut out = String::with_capacity(head.len() + note_text.len() + tail.len());
    out.push_str(head);
    out.push_str(note_text);
    out.push_str(tail);
    Ok(out)
}

pub fn render_prompt(prompt: &AspectPrompt, note_text: &str) -> Result<String, SummarizerError> {
    render_template(&prompt.template, note_text)
}
