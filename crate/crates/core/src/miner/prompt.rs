use super::MinerError;

pub const CATEGORY_SPACE: &str = "CDM | EDM | IDM | TOM | DMM | AM | NONE";

const PRESENT_LABEL: &str = "CONNECTIVE PRESENT:";
const CONNECTIVE_LABEL: &str = "CONNECTIVE:";

/// Renders the annotation prompt for one turn pair.
pub fn build_llm_prompt(s1: &str, s2: &str, calibration: Option<&str>) -> String {
    let mut p = format!(
        "You are a discourse and conversation analysis expert.\n\
         \n\
         Input:\n\
         S1 (Speaker A): {s1}\n\
         S2 (Speaker B): {s2}\n\
         \n\
         Identify turn-taking discourse connectives at the beginning of S2.\n\
         A connective is turn-initial, non-truth-conditional, span-based,\n\
         and introduces no new propositional content.\n\
         \n\
         Functional category space:\n\
         {CATEGORY_SPACE}\n\
         \n\
         Decision procedure:\n\
         1. Check whether S2 begins with a connective.\n\
         2. If not, generate an appropriate connective or NONE.\n\
         \n\
         Output exactly two lines:\n\
         {PRESENT_LABEL} YES | NO\n\
         {CONNECTIVE_LABEL} <CONNECTIVE or NONE>\n"
    );
    if let Some(block) = calibration {
        p.push_str("\nCalibration examples:\n");
        p.push_str(block.trim_end());
        p.push('\n');
    }
    p
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmAnnotation {
    /// Whether S2 already began with a connective.
    pub present: bool,
    /// Empty when the model answered NONE.
    pub connective: String,
}

/// Parses the two-line reply. Labels are matched case-insensitively and
/// surrounding whitespace is ignored; anything else is an error.
pub fn parse_llm_output(text: &str) -> Result<LlmAnnotation, MinerError> {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    if lines.len() != 2 {
        return Err(MinerError::Output(format!(
            "expected 2 lines, got {}",
            lines.len()
        )));
    }
    let present = match value_after(lines[0], PRESENT_LABEL)?
        .to_ascii_uppercase()
        .as_str()
    {
        "YES" => true,
        "NO" => false,
        other => {
            return Err(MinerError::Output(format!(
                "presence must be YES or NO, got {other:?}"
            )))
        }
    };
    let value = value_after(lines[1], CONNECTIVE_LABEL)?;
    let none = value.eq_ignore_ascii_case("NONE") || value.is_empty();
    if present && none {
        return Err(MinerError::Output(
            "connective marked present but given as NONE".into(),
        ));
    }
    Ok(LlmAnnotation {
        present,
        connective: if none {
            String::new()
        } else {
            value.to_string()
        },
    })
}

fn value_after<'a>(line: &'a str, label: &str) -> Result<&'a str, MinerError> {
    let head = line
        .get(..label.len())
        .filter(|h| h.eq_ignore_ascii_case(label));
    match head {
        Some(_) => Ok(line[label.len()..].trim()),
        None => Err(MinerError::Output(format!(
            "expected {label:?}, got {line:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_structure() {
        let p = build_llm_prompt("Is it raining?", "Yes, bring an umbrella.", None);
        assert!(p.contains(CATEGORY_SPACE));
        assert!(p.contains("CONNECTIVE PRESENT: YES | NO\nCONNECTIVE: <CONNECTIVE or NONE>"));
        assert!(p.contains("S2 (Speaker B): Yes, bring an umbrella."));
        assert_eq!(
            p,
            build_llm_prompt("Is it raining?", "Yes, bring an umbrella.", None)
        );
        let with = build_llm_prompt("a", "b", Some("S2: Well, fine -> YES / Well,"));
        let spec_at = with.find("CONNECTIVE: <CONNECTIVE").unwrap();
        assert!(with.find("Well, fine").unwrap() > spec_at);
    }

    #[test]
    fn parses_replies() {
        assert_eq!(
            parse_llm_output("CONNECTIVE PRESENT: YES\nCONNECTIVE: Well,").unwrap(),
            LlmAnnotation {
                present: true,
                connective: "Well,".into()
            }
        );
        assert_eq!(
            parse_llm_output("  connective present: no \n\nConnective: none\n").unwrap(),
            LlmAnnotation {
                present: false,
                connective: String::new()
            }
        );
        assert!(parse_llm_output("I think the connective is...").is_err());
        assert!(parse_llm_output("CONNECTIVE PRESENT: YES\nCONNECTIVE: NONE").is_err());
        assert!(parse_llm_output("CONNECTIVE PRESENT: MAYBE\nCONNECTIVE: Well,").is_err());
        assert!(parse_llm_output("CONNECTIVE PRESENT: NO\nCONNECTIVE: So,\nextra").is_err());
    }

    #[test]
    fn generated_connective_without_presence() {
        let a = parse_llm_output("CONNECTIVE PRESENT: NO\nCONNECTIVE: I see,").unwrap();
        assert!(!a.present);
        assert_eq!(a.connective, "I see,");
    }
}
