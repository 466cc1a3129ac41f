use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown sentinel role `{0}`")]
pub struct UnknownRole(pub String);

macro_rules! sentinels {
    ($($variant:ident => $role:literal, $literal:literal;)*) => {
        /// Reserved structural tokens that may appear in rendered training documents.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum Sentinel {
            $($variant,)*
        }

        impl Sentinel {
            pub const ALL: &'static [Sentinel] = &[$(Sentinel::$variant,)*];

            /// The literal token text.
            pub const fn as_str(self) -> &'static str {
                match self {
                    $(Sentinel::$variant => $literal,)*
                }
            }

            /// Role name used in configuration and on the command line.
            pub const fn role(self) -> &'static str {
                match self {
                    $(Sentinel::$variant => $role,)*
                }
            }
        }

        impl FromStr for Sentinel {
            type Err = UnknownRole;

            fn from_str(role: &str) -> Result<Self, Self::Err> {
                match role {
                    $($role => Ok(Sentinel::$variant),)*
                    other => Err(UnknownRole(other.to_string())),
                }
            }
        }
    };
}

sentinels! {
    EndOfText => "end_of_text", "<|endoftext|>";
    FimPrefix => "fim_prefix", "<fim_prefix>";
    FimMiddle => "fim_middle", "<fim_middle>";
    FimSuffix => "fim_suffix", "<fim_suffix>";
    FimPad => "fim_pad", "<fim_pad>";
    RepoName => "repo_name", "<repo_name>";
    FileSep => "file_separator", "<file_sep>";
    IssueStart => "issue_start", "<issue_start>";
    IssueComment => "issue_comment", "<issue_comment>";
    IssueClosed => "issue_closed", "<issue_closed>";
    JupyterStart => "jupyter_start", "<jupyter_start>";
    JupyterText => "jupyter_text", "<jupyter_text>";
    JupyterCode => "jupyter_code", "<jupyter_code>";
    JupyterOutput => "jupyter_output", "<jupyter_output>";
    JupyterScript => "jupyter_script", "<jupyter_script>";
    EmptyOutput => "empty_output", "<empty_output>";
    CodeToIntermediate => "code_to_intermediate", "<code_to_intermediate>";
    IntermediateToCode => "intermediate_to_code", "<intermediate_to_code>";
    Pr => "pr", "<pr>";
    PrStatus => "pr_status", "<pr_status>";
    PrIsMerged => "pr_is_merged", "<pr_is_merged>";
    PrBase => "pr_base", "<pr_base>";
    PrFile => "pr_file", "<pr_file>";
    PrBaseCode => "pr_base_code", "<pr_base_code>";
    PrDiff => "pr_diff", "<pr_diff>";
    PrDiffHunk => "pr_diff_hunk", "<pr_diff_hunk>";
    PrComment => "pr_comment", "<pr_comment>";
    PrEventId => "pr_event_id", "<pr_event_id>";
    PrReview => "pr_review", "<pr_review>";
    PrReviewState => "pr_review_state", "<pr_review_state>";
    PrReviewComment => "pr_review_comment", "<pr_review_comment>";
    PrInReplyToReviewId => "pr_in_reply_to_review_id", "<pr_in_reply_to_review_id>";
    PrInReplyToCommentId => "pr_in_reply_to_comment_id", "<pr_in_reply_to_comment_id>";
    PrDiffHunkCommentLine => "pr_diff_hunk_comment_line", "<pr_diff_hunk_comment_line>";
}

impl fmt::Display for Sentinel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Looks up the literal for a role name, e.g. `"file_separator"` gives `"<file_sep>"`.
pub fn sentinel(role: &str) -> Result<&'static str, UnknownRole> {
    role.parse::<Sentinel>().map(Sentinel::as_str)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn literals_for_named_roles() {
        assert_eq!(sentinel("end_of_text").unwrap(), "<|endoftext|>");
        assert_eq!(sentinel("fim_prefix").unwrap(), "<fim_prefix>");
        assert_eq!(sentinel("pr_diff_hunk").unwrap(), "<pr_diff_hunk>");
        assert_eq!(sentinel("file_separator").unwrap(), "<file_sep>");
    }

    #[test]
    fn unknown_role_is_an_error() {
        assert_eq!(sentinel("fim_start"), Err(UnknownRole("fim_start".into())));
    }

    #[test]
    fn vocabulary_is_total_and_injective() {
        assert_eq!(Sentinel::ALL.len(), 34);
        let literals: HashSet<_> = Sentinel::ALL.iter().map(|s| s.as_str()).collect();
        let roles: HashSet<_> = Sentinel::ALL.iter().map(|s| s.role()).collect();
        assert_eq!(literals.len(), Sentinel::ALL.len());
        assert_eq!(roles.len(), Sentinel::ALL.len());
        for s in Sentinel::ALL {
            assert!(!s.as_str().is_empty());
            assert_eq!(s.role().parse::<Sentinel>().unwrap(), *s);
        }
    }

    #[test]
    fn no_token_occurs_inside_another() {
        for a in Sentinel::ALL {
            for b in Sentinel::ALL {
                if a != b {
                    assert!(
                        !b.as_str().contains(a.as_str()),
                        "{a} occurs inside {b}"
                    );
                }
            }
        }
    }
}
