use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template `{template}` is missing a value for `{{{placeholder}}}`")]
    MissingPlaceholder {
        template: TemplateName,
        placeholder: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Validation,
    ConditionIdentification,
    AnswerGeneration,
    MedicationSuggestion,
    /// Used when no condition could be linked: the model answers the raw
    /// query without supporting pages.
    DirectAnswer,
}

impl TemplateName {
    pub const ALL: [TemplateName; 5] = [
        TemplateName::Validation,
        TemplateName::ConditionIdentification,
        TemplateName::AnswerGeneration,
        TemplateName::MedicationSuggestion,
        TemplateName::DirectAnswer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Validation => "validation",
            TemplateName::ConditionIdentification => "condition_identification",
            TemplateName::AnswerGeneration => "answer_generation",
            TemplateName::MedicationSuggestion => "medication_suggestion",
            TemplateName::DirectAnswer => "direct_answer",
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub text: &'static str,
    pub placeholders: &'static [&'static str],
}

const VALIDATION: &str = "\
You screen messages for a physiotherapy assistant.
Decide whether the user message below is written in English and is about \
physiotherapy: musculoskeletal pain, injuries, physical rehabilitation or \
recovery exercises.
Reply with exactly one word, True or False, and nothing else.

User message: {query}
Reply:";

const CONDITION_IDENTIFICATION: &str = "\
Name the physical condition described in the user message.
Reply with the condition name only, in lowercase, using at most a few words.

Message: I have sprained my ankle
Condition: ankle sprain

Message: My lower back hurts when I bend over to pick things up
Condition: back pain

Message: Since I woke up I can't turn my head, my neck is stiff
Condition: neck pain

Message: My shoulder hurts when I lift my arm above my head
Condition: shoulder impingement

Message: The front of my knee aches after I go running
Condition: runner's knee

Message: {query}
Condition:";

const ANSWER_GENERATION: &str = "\
You are a physiotherapy assistant. Answer the user's question using only \
the information contained in the reference pages below. Write short, plain \
sentences. If the pages do not cover the question, say so.

Reference pages:
{documents}

Question: {query}
Answer:";

const MEDICATION_SUGGESTION: &str = "\
User question: {query}
Identified condition: {condition}
Answer given to the user: {answer}

Suggest over-the-counter medications that may relieve these symptoms.
Respond only with a JSON array of strings, each a medication name, for \
example [\"medication a\", \"medication b\"]. Respond with [] if none apply.";

const DIRECT_ANSWER: &str = "\
You are a physiotherapy assistant. Answer the question below briefly and \
recommend that the user sees a specialist.

Question: {query}
Answer:";

pub fn template(name: TemplateName) -> PromptTemplate {
    let (text, placeholders): (&'static str, &'static [&'static str]) = match name {
        TemplateName::Validation => (VALIDATION, &["query"]),
        TemplateName::ConditionIdentification => (CONDITION_IDENTIFICATION, &["query"]),
        TemplateName::AnswerGeneration => (ANSWER_GENERATION, &["documents", "query"]),
        TemplateName::MedicationSuggestion => {
            (MEDICATION_SUGGESTION, &["query", "condition", "answer"])
        }
        TemplateName::DirectAnswer => (DIRECT_ANSWER, &["query"]),
    };
    PromptTemplate {
        name,
        text,
        placeholders,
    }
}

impl PromptTemplate {
    /// Substitutes every `{placeholder}` in a single left-to-right pass, so
    /// braces inside substituted values are never expanded again. Fails if
    /// any required placeholder has no value.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        for &placeholder in self.placeholders {
            if !values.iter().any(|(k, _)| *k == placeholder) {
                return Err(TemplateError::MissingPlaceholder {
                    template: self.name,
                    placeholder,
                });
            }
        }

        let mut out = String::with_capacity(self.text.len() + 256);
        let mut rest = self.text;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let substituted = after.find('}').and_then(|close| {
                let key = &after[..close];
                self.placeholders
                    .contains(&key)
                    .then(|| values.iter().find(|(k, _)| *k == key))
                    .flatten()
                    .map(|(_, v)| (close, *v))
            });
            match substituted {
                Some((close, value)) => {
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}
