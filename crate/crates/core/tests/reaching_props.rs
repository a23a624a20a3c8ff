use std::collections::BTreeSet;

use ffilint_core::model::{ArgForm, ArgValue, AssignRecord, Language, ValueForm};
use ffilint_core::reaching::{resolve_string_arg, ResolutionStatus, UseSite};
use proptest::prelude::*;

const SCOPES: [&str; 3] = ["<file>", "B.cpp::f", "B.cpp::<binding:B>"];
const VALUES: [&str; 3] = ["g", "h", ""];

fn assign(unit: &str, line: u32, scope: &str, var: &str, literal: Option<&str>) -> AssignRecord {
    AssignRecord {
        unit: unit.into(),
        line,
        language: Language::Cpp,
        scope_fqn: scope.into(),
        variable: var.into(),
        value_form: if literal.is_some() {
            ValueForm::StringLiteral
        } else {
            ValueForm::Other
        },
        literal: literal.map(str::to_string),
    }
}

fn assigns() -> impl Strategy<Value = Vec<AssignRecord>> {
    let one = (
        prop_oneof![3 => Just("B.cpp"), 1 => Just("C.cpp")],
        1u32..30,
        0usize..3,
        prop_oneof![3 => Just("n"), 1 => Just("k")],
        prop::option::weighted(0.8, 0usize..3),
    )
        .prop_map(|(unit, line, scope, var, value)| {
            assign(unit, line, SCOPES[scope], var, value.map(|v| VALUES[v]))
        });
    prop::collection::vec(one, 0..12)
}

/// Hand-enumerated reaching set for `n` at (B.cpp, line, scope).
fn oracle(assigns: &[AssignRecord], line: u32, scope: &str) -> (ResolutionStatus, Option<String>) {
    let earlier = |a: &&AssignRecord| a.unit == "B.cpp" && a.variable == "n" && a.line < line;
    let mut reaching: Vec<&AssignRecord> = assigns
        .iter()
        .filter(earlier)
        .filter(|a| a.scope_fqn == scope)
        .collect();
    if reaching.is_empty() && scope != "<file>" {
        reaching = assigns
            .iter()
            .filter(earlier)
            .filter(|a| a.scope_fqn == "<file>")
            .collect();
    }
    if reaching.is_empty() || reaching.iter().any(|a| a.literal.is_none()) {
        return (ResolutionStatus::Unresolved, None);
    }
    let values: BTreeSet<&str> = reaching
        .iter()
        .filter_map(|a| a.literal.as_deref())
        .collect();
    if values.len() == 1 {
        (
            ResolutionStatus::Resolved,
            values.into_iter().next().map(str::to_string),
        )
    } else {
        (ResolutionStatus::Unresolved, None)
    }
}

fn resolve(assigns: &[AssignRecord], line: u32, scope: &str) -> (ResolutionStatus, Option<String>) {
    let site = UseSite {
        unit: "B.cpp",
        line,
        scope_fqn: scope,
    };
    let r = resolve_string_arg(&ArgValue::new(ArgForm::Identifier, "n"), site, assigns);
    (r.status, r.value)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matches_brute_force(a in assigns(), line in 1u32..32, scope in 0usize..3) {
        prop_assert_eq!(resolve(&a, line, SCOPES[scope]), oracle(&a, line, SCOPES[scope]));
    }

    #[test]
    fn assignment_order_is_irrelevant(
        (a, shuffled) in assigns().prop_flat_map(|a| (Just(a.clone()), Just(a).prop_shuffle())),
        line in 1u32..32,
        scope in 0usize..3,
    ) {
        prop_assert_eq!(resolve(&a, line, SCOPES[scope]), resolve(&shuffled, line, SCOPES[scope]));
    }

    #[test]
    fn non_literal_never_helps(a in assigns(), line in 2u32..32, scope in 0usize..3, at in 1u32..31) {
        let before = resolve(&a, line, SCOPES[scope]);
        let mut more = a.clone();
        more.push(assign("B.cpp", at.min(line - 1), SCOPES[scope], "n", None));
        let after = resolve(&more, line, SCOPES[scope]);
        prop_assert_eq!(after.0, ResolutionStatus::Unresolved);
        if before.0 == ResolutionStatus::Unresolved {
            prop_assert_eq!(after, before);
        }
    }

    #[test]
    fn later_and_foreign_assignments_are_ignored(a in assigns(), line in 1u32..32, scope in 0usize..3) {
        let before = resolve(&a, line, SCOPES[scope]);
        let mut more = a.clone();
        more.push(assign("B.cpp", line, SCOPES[scope], "n", Some("late")));
        more.push(assign("B.cpp", line + 5, "<file>", "n", None));
        more.push(assign("Z.cpp", 1, SCOPES[scope], "n", None));
        more.push(assign("B.cpp", 1, SCOPES[scope], "other", None));
        prop_assert_eq!(resolve(&more, line, SCOPES[scope]), before);
    }

    #[test]
    fn literal_arguments_resolve_to_themselves(text in "[a-z]{0,6}") {
        let arg = ArgValue::string_literal(format!("\"{text}\""), text.clone());
        let site = UseSite { unit: "B.cpp", line: 1, scope_fqn: "<file>" };
        let r = resolve_string_arg(&arg, site, &[]);
        prop_assert_eq!(r.status, ResolutionStatus::Resolved);
        prop_assert_eq!(r.value, Some(text));
    }
}

#[test]
fn two_literals_collapse() {
    let a = [
        assign("B.cpp", 1, "<file>", "n", Some("g")),
        assign("B.cpp", 2, "<file>", "n", Some("h")),
    ];
    assert_eq!(
        resolve(&a, 3, "B.cpp::<binding:B>").0,
        ResolutionStatus::Unresolved
    );
    assert_eq!(
        resolve(&a[..1], 3, "B.cpp::<binding:B>"),
        (ResolutionStatus::Resolved, Some("g".into()))
    );
}

#[test]
fn local_scope_shadows_file_scope() {
    let a = [
        assign("B.cpp", 1, "<file>", "n", Some("g")),
        assign("B.cpp", 5, "B.cpp::f", "n", Some("h")),
    ];
    assert_eq!(resolve(&a, 6, "B.cpp::f").1.as_deref(), Some("h"));
    assert_eq!(resolve(&a, 6, "B.cpp::<binding:B>").1.as_deref(), Some("g"));
    assert_eq!(resolve(&a, 4, "B.cpp::f").1.as_deref(), Some("g"));
}

#[test]
fn non_string_arguments() {
    let site = UseSite {
        unit: "B.cpp",
        line: 1,
        scope_fqn: "<file>",
    };
    let r = resolve_string_arg(&ArgValue::new(ArgForm::Other, "a + b"), site, &[]);
    assert_eq!(r.status, ResolutionStatus::NotAString);
}
