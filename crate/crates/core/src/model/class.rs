use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// A verb-noun label such as `pour oil`.
///
/// Both tokens are non-empty, lowercase, and free of whitespace and commas,
/// which makes the `"verb noun"` string form unambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawClass")]
pub struct ActionClass {
    verb: String,
    noun: String,
}

#[derive(Deserialize)]
struct RawClass {
    verb: String,
    noun: String,
}

impl TryFrom<RawClass> for ActionClass {
    type Error = ModelError;

    fn try_from(raw: RawClass) -> Result<Self, Self::Error> {
        ActionClass::new(&raw.verb, &raw.noun)
    }
}

fn check_token(token: &str) -> Result<(), ModelError> {
    let bad = token.is_empty() || token.chars().any(|c| c.is_whitespace() || c == ',' || c.is_uppercase());
    if bad {
        Err(ModelError::InvalidClassToken(token.to_string()))
    } else {
        Ok(())
    }
}

impl ActionClass {
    pub fn new(verb: &str, noun: &str) -> Result<Self, ModelError> {
        check_token(verb)?;
        check_token(noun)?;
        Ok(Self {
            verb: verb.to_string(),
            noun: noun.to_string(),
        })
    }

    pub fn verb(&self) -> &str {
        &self.verb
    }

    pub fn noun(&self) -> &str {
        &self.noun
    }
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.verb, self.noun)
    }
}

impl FromStr for ActionClass {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(' ') {
            Some((verb, noun)) => ActionClass::new(verb, noun),
            None => Err(ModelError::InvalidClassToken(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_and_parse() {
        let c = ActionClass::new("pour", "oil").unwrap();
        assert_eq!(c.to_string(), "pour oil");
        assert_eq!("pour oil".parse::<ActionClass>().unwrap(), c);
    }

    #[test]
    fn rejects_bad_tokens() {
        assert!(ActionClass::new("", "oil").is_err());
        assert!(ActionClass::new("Pour", "oil").is_err());
        assert!(ActionClass::new("pour", "olive oil").is_err());
        assert!(ActionClass::new("pour", "oil,x").is_err());
        assert!("pour".parse::<ActionClass>().is_err());
        assert!("pour  oil".parse::<ActionClass>().is_err());
    }

    proptest! {
        #[test]
        fn parse_inverts_display(verb in "[a-z0-9_-]{1,8}", noun in "[a-z0-9_-]{1,8}") {
            let c = ActionClass::new(&verb, &noun).unwrap();
            prop_assert_eq!(c.to_string().parse::<ActionClass>().unwrap(), c);
        }
    }
}
