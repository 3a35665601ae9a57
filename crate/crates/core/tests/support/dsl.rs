use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scls_core::aedes::MODEL;
use scls_core::dsl::{parse_events, parse_model, parse_pattern, parse_rule, parse_term};
use scls_core::pattern::{Exponent, ExponentFn, InfoPattern, LoopPattern, Pattern, PatternAtom, PatternItem};
use scls_core::rules::{Bound, Guard, RateFn, RewriteRule, Selection};
use scls_core::term::{canonicalize, EnvInfo, NonParallel, Sequence, Symbol, Term, Value};

fn symbol() -> impl Strategy<Value = Symbol> {
    "[A-Za-z0-9_]{1,4}".prop_filter_map("reserved", |s| Symbol::new(s).ok())
}

fn sequence() -> impl Strategy<Value = Sequence> {
    prop::collection::vec(symbol(), 0..4).prop_map(Sequence)
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<i64>().prop_map(Value::Int),
        any::<f64>().prop_filter("finite", |r| r.is_finite()).prop_map(Value::Real),
        (-1000i32..1000, 0u32..4).prop_map(|(n, k)| Value::Real(n as f64 / 10f64.powi(k as i32))),
        any::<bool>().prop_map(Value::Bool),
        "[a-z_][a-z0-9_]{0,5}(-[a-z0-9]{1,3})?".prop_filter_map("reserved", |s| Value::token(s).ok()),
    ]
}

fn info() -> impl Strategy<Value = EnvInfo> {
    prop::collection::btree_map(symbol(), value(), 0..4).prop_map(EnvInfo)
}

fn seq_term() -> impl Strategy<Value = Term> {
    prop::collection::vec((sequence(), 1u64..4), 0..3)
        .prop_map(|v| canonicalize(v.into_iter().map(|(s, m)| (NonParallel::Seq(s), m))))
}

pub fn term() -> impl Strategy<Value = Term> {
    let leaf = seq_term();
    leaf.prop_recursive(3, 40, 4, |inner| {
        prop::collection::vec(
            prop_oneof![
                (sequence(), 1u64..5).prop_map(|(s, m)| (NonParallel::Seq(s), m)),
                (seq_term(), info(), inner, 1u64..5).prop_map(|(w, i, c, m)| (NonParallel::looping(w, i, c), m)),
            ],
            0..4,
        )
        .prop_map(canonicalize)
    })
}

/// Variable slots are filled with unique names afterwards.
const SLOT: &str = "_";

fn left_exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![3 => (0u64..5).prop_map(Exponent::Lit), 1 => Just(Exponent::Var(SLOT.into()))]
}

fn rest() -> impl Strategy<Value = Option<String>> {
    prop::option::of(Just(SLOT.to_string()))
}

/// ε is the identity of parallel composition, so pattern items are nonempty.
fn seq_item() -> impl Strategy<Value = PatternItem> {
    (prop::collection::vec(symbol(), 1..4).prop_map(Sequence), left_exponent()).prop_map(|(s, exp)| PatternItem {
        atom: PatternAtom::Seq(s),
        exp,
    })
}

fn left_level() -> impl Strategy<Value = Pattern> {
    let leaf = (prop::collection::vec(seq_item(), 0..3), rest()).prop_map(|(items, rest)| Pattern { items, rest });
    leaf.prop_recursive(2, 12, 3, |inner| {
        let loop_item = (seq_term(), info(), rest(), inner, left_exponent()).prop_map(|(wall, literal, r, content, exp)| {
            PatternItem {
                atom: PatternAtom::Loop(Box::new(LoopPattern {
                    wall,
                    info: InfoPattern { literal, rest: r },
                    content,
                })),
                exp,
            }
        });
        (prop::collection::vec(prop_oneof![seq_item(), loop_item], 0..3), rest())
            .prop_map(|(items, rest)| Pattern { items, rest })
    })
}

#[derive(Default)]
struct Names {
    terms: Vec<String>,
    infos: Vec<String>,
    nats: Vec<String>,
}

fn name_slots(p: &mut Pattern, n: &mut Names) {
    for it in &mut p.items {
        if let Exponent::Var(q) = &mut it.exp {
            *q = format!("q{}", n.nats.len());
            n.nats.push(q.clone());
        }
        if let PatternAtom::Loop(lp) = &mut it.atom {
            if let Some(x) = &mut lp.info.rest {
                *x = format!("i{}", n.infos.len());
                n.infos.push(x.clone());
            }
            name_slots(&mut lp.content, n);
        }
    }
    if let Some(x) = &mut p.rest {
        *x = format!("X{}", n.terms.len());
        n.terms.push(x.clone());
    }
}

/// A right-hand side using only variables bound by the left.
fn right_level(n: &Names, rng: &mut ChaCha8Rng, depth: u32) -> Pattern {
    let pick = |v: &[String], rng: &mut ChaCha8Rng| v[rng.gen_range(0..v.len())].clone();
    let mut items = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        let exp = match rng.gen_range(0..4) {
            0 if !n.nats.is_empty() => Exponent::Var(pick(&n.nats, rng)),
            1 if !n.nats.is_empty() => Exponent::VarPlus(pick(&n.nats, rng), rng.gen_range(0..4)),
            2 => Exponent::Call(ExponentFn::Eggs, rng.gen_range(1..=8)),
            _ => Exponent::Lit(rng.gen_range(0..4)),
        };
        let atom = if depth > 0 && rng.gen_bool(0.5) {
            let rest = (!n.infos.is_empty() && rng.gen_bool(0.5)).then(|| pick(&n.infos, rng));
            let literal = if rng.gen_bool(0.5) {
                EnvInfo::new().with("Vol", Value::token("full").unwrap()).unwrap()
            } else {
                EnvInfo::new()
            };
            PatternAtom::Loop(Box::new(LoopPattern {
                wall: parse_term("a.b | c").unwrap(),
                info: InfoPattern { literal, rest },
                content: right_level(n, rng, depth - 1),
            }))
        } else {
            PatternAtom::Seq(Sequence(vec![Symbol::new(format!("s{}", rng.gen_range(0..5))).unwrap()]))
        };
        items.push(PatternItem { atom, exp });
    }
    let rest = (!n.terms.is_empty() && rng.gen_bool(0.6)).then(|| pick(&n.terms, rng));
    Pattern { items, rest }
}

pub fn rule() -> impl Strategy<Value = RewriteRule> {
    (left_level(), any::<u64>(), "[A-Za-z][A-Za-z0-9_]{0,5}").prop_filter_map("invalid rule", |(mut left, seed, id)| {
        let mut n = Names::default();
        name_slots(&mut left, &mut n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let right = right_level(&n, &mut rng, 2);
        let rate = match rng.gen_range(0..3) {
            0 => RateFn::Const(rng.gen_range(0.0..100.0)),
            1 => RateFn::Immature(rng.gen_range(1..=21)),
            _ => RateFn::Adult(rng.gen_range(7..=29)),
        };
        let (guard, selection) = match n.nats.first() {
            Some(q) if rng.gen_bool(0.7) => (
                Guard::Greater {
                    var: q.clone(),
                    bound: if rng.gen_bool(0.5) {
                        Bound::Lit(rng.gen_range(0..10))
                    } else {
                        Bound::Param("phi".into())
                    },
                },
                if rng.gen_bool(0.5) {
                    Selection::MinNat(q.clone())
                } else {
                    Selection::MaxNat(q.clone())
                },
            ),
            _ => (Guard::Always, Selection::Weighted),
        };
        let target = left.items.iter().find_map(|it| match &it.atom {
            PatternAtom::Loop(lp) => lp.info.rest.clone(),
            PatternAtom::Seq(_) => None,
        });
        let target = target.filter(|_| rng.gen_bool(0.5));
        if id == "rule" || id == "select" || id == "target" {
            return None;
        }
        RewriteRule::new(id, guard, left, right, rate, selection, target).ok()
    })
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

/// `parse(print(t)) == t` for `cases` generated terms.
pub fn terms_round_trip(cases: u32) {
    runner(cases)
        .run(&term(), |t| {
            let text = t.to_string();
            let back = parse_term(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
            prop_assert_eq!(&back, &t, "{}", text);
            prop_assert_eq!(back.to_string(), text);
            Ok(())
        })
        .unwrap();
}

/// `parse(print(r)) == r` for `cases` generated rules.
pub fn rules_round_trip(cases: u32) {
    runner(cases)
        .run(&rule(), |r| {
            let text = r.to_string();
            let back = parse_rule(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
            prop_assert_eq!(&back, &r, "{}", text);
            let lhs = r.left.to_string();
            prop_assert_eq!(parse_pattern(&lhs).map_err(|e| TestCaseError::fail(e.to_string()))?, r.left.clone());
            Ok(())
        })
        .unwrap();
}

pub fn bundled_rules_round_trip() {
    let rules = parse_model(MODEL).unwrap();
    assert_eq!(rules.len(), 29);
    let printed: Vec<String> = rules.iter().map(|r| r.to_string()).collect();
    for (r, text) in rules.iter().zip(&printed) {
        let back = parse_rule(text).unwrap();
        assert_eq!(&back, r);
        assert_eq!(&back.to_string(), text);
    }
    assert_eq!(parse_model(&printed.join("\n")).unwrap(), rules);
}

const FRAGMENTS: [&str; 36] = [
    "{", "}", "<", ">", "[", "]", "(", ")", "|", "^", ".", ":", ";", ",", "@", "$", "#", "=>", "rule", "select",
    "target", "min", "max", "0", "eps", "a", "Egg", "Vol", "full", "true", "1.5", "-3", "12", " ", "--", "\n",
];

fn fuzz_input(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    let n = rng.gen_range(0..40);
    for _ in 0..n {
        if rng.gen_bool(0.8) {
            s.push_str(FRAGMENTS[rng.gen_range(0..FRAGMENTS.len())]);
        } else {
            s.push(char::from_u32(rng.gen_range(0..0x250)).unwrap_or('?'));
        }
    }
    s
}

/// Feeds `n` random inputs to every parser entry point. Returns how many
/// were accepted by at least one of them.
pub fn fuzz_parsers(n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bundled: Vec<&str> = MODEL.lines().collect();
    let mut accepted = 0;
    for k in 0..n {
        let input = match k % 4 {
            0 => {
                let line = bundled[rng.gen_range(0..bundled.len())];
                let mut b: Vec<char> = line.chars().collect();
                if !b.is_empty() {
                    let i = rng.gen_range(0..b.len());
                    match rng.gen_range(0..3) {
                        0 => {
                            b.remove(i);
                        }
                        1 => b.insert(i, FRAGMENTS[rng.gen_range(0..FRAGMENTS.len())].chars().next().unwrap_or(' ')),
                        _ => b.truncate(i),
                    }
                }
                b.into_iter().collect()
            }
            1 => "[".repeat(rng.gen_range(0..2000)) + &"{a}<>".repeat(rng.gen_range(0..50)),
            _ => fuzz_input(&mut rng),
        };
        let ok = [
            parse_term(&input).is_ok(),
            parse_pattern(&input).is_ok(),
            parse_rule(&input).is_ok(),
            parse_model(&input).is_ok(),
            parse_events(&input).is_ok(),
        ];
        if ok.iter().any(|x| *x) {
            accepted += 1;
        }
    }
    accepted
}
