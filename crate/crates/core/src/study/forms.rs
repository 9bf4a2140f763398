use serde::{Deserialize, Serialize};

use super::types::{Answer, Answers};
use super::StudyError;

const BUNDLED: &str = include_str!("../../data/study_forms.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Likert { min: i64, max: i64 },
    Choice { options: Vec<String> },
    Text,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormField {
    pub key: String,
    pub prompt: String,
    pub kind: FieldKind,
    #[serde(default = "yes")]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyForm {
    pub id: String,
    pub fields: Vec<FormField>,
}

impl SurveyForm {
    /// Checks that every required field is answered, every answer belongs to a
    /// known field, and values fit the field kind.
    pub fn validate(&self, answers: &Answers) -> Result<(), StudyError> {
        let err = |msg: String| Err(StudyError::Validation(format!("{}: {msg}", self.id)));
        for key in answers.keys() {
            if !self.fields.iter().any(|f| &f.key == key) {
                return err(format!("unknown field {key:?}"));
            }
        }
        for field in &self.fields {
            let Some(answer) = answers.get(&field.key) else {
                if field.required {
                    return err(format!("missing required field {:?}", field.key));
                }
                continue;
            };
            match (&field.kind, answer) {
                (FieldKind::Likert { min, max }, Answer::Level(v)) if (min..=max).contains(&v) => {}
                (FieldKind::Choice { options }, Answer::Text(t)) if options.contains(t) => {}
                (FieldKind::Text, Answer::Text(_)) => {}
                _ => return err(format!("bad value {answer:?} for field {:?}", field.key)),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismNote {
    pub mechanism: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub seeker_post: String,
    pub response: String,
}

/// Training content. Every arm sees the same material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMaterial {
    pub empathy_definition: String,
    pub framework: Vec<MechanismNote>,
    pub examples: Vec<TrainingExample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyForms {
    pub demographics: SurveyForm,
    pub pre_survey: SurveyForm,
    pub post_survey: SurveyForm,
    pub training: TrainingMaterial,
}

impl StudyForms {
    pub fn parse(src: &str) -> Result<Self, StudyError> {
        serde_json::from_str(src).map_err(|e| StudyError::Validation(format!("study forms: {e}")))
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled study forms are valid")
    }
}

impl Default for StudyForms {
    fn default() -> Self {
        Self::bundled()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answers(pairs: &[(&str, Answer)]) -> Answers {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn pre_survey_validation() {
        let forms = StudyForms::bundled();
        let ok = answers(&[
            ("peer_support_experience", Answer::Text("some".into())),
            ("writing_challenging", Answer::Text("challenging".into())),
            ("confidence_writing", Answer::Level(3)),
            ("feedback_openness", Answer::Level(5)),
        ]);
        forms.pre_survey.validate(&ok).unwrap();

        let mut bad = ok.clone();
        bad.insert("confidence_writing".into(), Answer::Level(9));
        assert!(forms.pre_survey.validate(&bad).is_err());

        let mut missing = ok.clone();
        missing.remove("writing_challenging");
        assert!(forms.pre_survey.validate(&missing).is_err());

        let mut extra = ok;
        extra.insert("shoe_size".into(), Answer::Level(9));
        assert!(forms.pre_survey.validate(&extra).is_err());
    }

    #[test]
    fn optional_fields_may_be_skipped() {
        let forms = StudyForms::bundled();
        forms
            .post_survey
            .validate(&answers(&[("confidence_writing", Answer::Level(4))]))
            .unwrap();
    }
}
