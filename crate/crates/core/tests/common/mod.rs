#![allow(dead_code)]

use ffilint_core::ffi::{BindingRecord, BindingStatus, CallFlag, ResolvedCall, UNRESOLVED};
use ffilint_core::model::{
    anonymous_name, ArgForm, ArgValue, AssignRecord, CallSite, FunctionDef, ImportMechanism,
    ImportRecord, IncludeRecord, Language, RawBinding, ValueForm,
};
use proptest::prelude::*;

/// Text that stresses CSV quoting: commas, quotes, newlines, non-ASCII.
pub fn awkward() -> impl Strategy<Value = String> {
    "[a-z ,\"'\n\r\t\u{e9}\u{4e2d}|<>:.]{0,10}"
}

pub fn ident() -> impl Strategy<Value = String> {
    "[a-zA-Z_][a-zA-Z0-9_]{0,6}"
}

pub fn unit() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("A.py".to_string()),
        Just("B.cpp".to_string()),
        Just("src/dir, with comma/b.h".to_string()),
        Just("q\"uote.cc".to_string()),
        "[a-z]{1,4}/[a-z]{1,4}\\.(py|cpp|h)",
    ]
}

pub fn language() -> impl Strategy<Value = Language> {
    prop_oneof![Just(Language::Python), Just(Language::Cpp)]
}

pub fn line() -> impl Strategy<Value = u32> {
    1u32..400
}

pub fn arg() -> impl Strategy<Value = ArgValue> {
    let form = prop_oneof![
        Just(ArgForm::Identifier),
        Just(ArgForm::FunctionRef),
        Just(ArgForm::Lambda),
        Just(ArgForm::Other),
    ];
    prop_oneof![
        (awkward(), awkward()).prop_map(|(t, l)| ArgValue::string_literal(t, l)),
        (form, awkward()).prop_map(|(f, t)| ArgValue::new(f, t)),
    ]
}

pub fn def() -> impl Strategy<Value = FunctionDef> {
    (
        unit(),
        line(),
        language(),
        prop::collection::vec(ident(), 0..3),
        prop_oneof![ident(), (1u32..9).prop_map(anonymous_name)],
        any::<bool>(),
        0u32..6,
    )
        .prop_map(
            |(unit, line, language, scope, name, body, arity)| FunctionDef {
                unit,
                line,
                language,
                scope,
                is_anonymous: name.starts_with('<'),
                name,
                has_body: body || language == Language::Python,
                arity,
            },
        )
}

pub fn call() -> impl Strategy<Value = CallSite> {
    (
        unit(),
        line(),
        language(),
        "[a-z<>:.]{1,12}",
        "[a-zA-Z_.]{1,10}",
        prop::collection::vec(arg(), 0..4),
    )
        .prop_map(
            |(unit, line, language, caller_fqn, callee_expr, args)| CallSite {
                unit,
                line,
                language,
                caller_fqn,
                callee_expr,
                args,
            },
        )
}

pub fn import() -> impl Strategy<Value = ImportRecord> {
    let mechanism = prop_oneof![
        Just(ImportMechanism::Standard),
        Just(ImportMechanism::Dynamic)
    ];
    (
        unit(),
        line(),
        "[a-z.]{1,8}",
        "[a-z*]{1,5}",
        "[a-z*]{0,5}",
        mechanism,
    )
        .prop_map(
            |(unit, line, imported_name, alias, member, mechanism)| ImportRecord {
                unit,
                line,
                imported_name,
                alias,
                member,
                mechanism,
            },
        )
}

pub fn assign() -> impl Strategy<Value = AssignRecord> {
    (
        unit(),
        line(),
        language(),
        awkward(),
        ident(),
        prop::option::of(awkward()),
    )
        .prop_map(
            |(unit, line, language, scope_fqn, variable, literal)| AssignRecord {
                unit,
                line,
                language,
                scope_fqn,
                variable,
                value_form: if literal.is_some() {
                    ValueForm::StringLiteral
                } else {
                    ValueForm::Other
                },
                literal,
            },
        )
}

pub fn include() -> impl Strategy<Value = IncludeRecord> {
    (unit(), line(), awkward(), any::<bool>()).prop_map(|(unit, line, included_path, first)| {
        IncludeRecord {
            unit,
            line,
            included_path,
            is_first_substantive: first,
        }
    })
}

pub fn raw_binding() -> impl Strategy<Value = RawBinding> {
    let target = arg().prop_filter("targets are not string literals", |a| {
        a.form != ArgForm::StringLiteral
    });
    (unit(), line(), ident(), ident(), arg(), target).prop_map(
        |(unit, line, module, module_var, exposed_arg, target_arg)| RawBinding {
            unit,
            line,
            module,
            module_var,
            exposed_arg,
            target_arg,
        },
    )
}

pub fn binding() -> impl Strategy<Value = BindingRecord> {
    let status = prop_oneof![
        Just(BindingStatus::Resolved),
        Just(BindingStatus::Anonymous),
        Just(BindingStatus::Unresolved),
    ];
    (ident(), unit(), line(), awkward(), awkward(), status)
        .prop_map(|(module, unit, line, exposed_name, target_fqn, status)| {
            let exposed_name = if status == BindingStatus::Unresolved {
                UNRESOLVED.to_string()
            } else {
                exposed_name
            };
            BindingRecord {
                module,
                unit,
                line,
                exposed_name,
                target_fqn,
                status,
            }
        })
        .prop_filter("resolved bindings have a target", |b| {
            b.status != BindingStatus::Resolved || b.target_fqn != UNRESOLVED
        })
}

pub fn resolved_call() -> impl Strategy<Value = ResolvedCall> {
    let flag = prop::option::of(prop_oneof![
        Just(CallFlag::Anonymous),
        Just(CallFlag::Unresolved)
    ]);
    (
        call(),
        any::<bool>(),
        prop::collection::vec("[a-z.:/]{1,8}", 0..3),
        flag,
    )
        .prop_map(|(call, cross, callees, flag)| {
            let cross_language = cross && !callees.is_empty();
            ResolvedCall {
                call,
                cross_language,
                resolved_callee: callees.join("|"),
                flag,
            }
        })
}
