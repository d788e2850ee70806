//! Generative checks on the source language: printing an assignment and
//! parsing it back must lose nothing, and normalization must be a fixed
//! point after one application.

use proptest::prelude::*;
use symten::ast::normalize;
use symten::parse::parse;

const VARS: [&str; 5] = ["i", "j", "k", "l", "m"];
const NAMES: [&str; 3] = ["A", "B", "D"];
const COMBOS: [(&str, &str); 4] = [("+=", "*"), ("=", "*"), ("min=", "+"), ("max=", "+")];

#[derive(Debug, Clone)]
struct Draft {
    accesses: Vec<Vec<usize>>,
    out_mask: usize,
    combo: usize,
    full_sym: bool,
    with_sym: bool,
    rot: usize,
}

fn arb_draft() -> impl Strategy<Value = Draft> {
    (
        prop::collection::vec(prop::collection::vec(0usize..VARS.len(), 1..=3), 1..=3),
        any::<usize>(),
        0usize..COMBOS.len(),
        any::<bool>(),
        any::<bool>(),
        any::<usize>(),
    )
        .prop_map(|(mut accesses, out_mask, combo, full_sym, with_sym, rot)| {
            for vars in &mut accesses {
                let mut seen = Vec::new();
                vars.retain(|v| {
                    let fresh = !seen.contains(v);
                    seen.push(*v);
                    fresh
                });
            }
            Draft { accesses, out_mask, combo, full_sym, with_sym, rot }
        })
}

fn render(d: &Draft) -> String {
    let mut used: Vec<usize> = Vec::new();
    for vars in &d.accesses {
        for &v in vars {
            if !used.contains(&v) {
                used.push(v);
            }
        }
    }

    let out_vars: Vec<&str> = used
        .iter()
        .enumerate()
        .filter(|(slot, _)| d.out_mask >> slot & 1 == 1)
        .map(|(_, &v)| VARS[v])
        .collect();
    let (reduce, join) = COMBOS[d.combo];
    let terms: Vec<String> = d
        .accesses
        .iter()
        .enumerate()
        .map(|(n, vars)| {
            let idx: Vec<&str> = vars.iter().map(|&v| VARS[v]).collect();
            format!("{}[{}]", NAMES[n], idx.join(", "))
        })
        .collect();

    let mut text = format!(
        "Y[{}] {} {}",
        out_vars.join(", "),
        reduce,
        terms.join(&format!(" {join} "))
    );
    if d.with_sym && d.accesses[0].len() >= 2 {
        let axes: Vec<String> = if d.full_sym {
            (1..=d.accesses[0].len()).map(|a| a.to_string()).collect()
        } else {
            vec!["1".to_string(), "2".to_string()]
        };
        text.push_str(&format!("\nsym {}: {{{}}}", NAMES[0], axes.join(", ")));
    }
    let loops: Vec<&str> = (0..used.len())
        .map(|slot| VARS[used[(slot + d.rot) % used.len()]])
        .collect();
    text.push_str(&format!("\nloop {}", loops.join(", ")));
    text
}

proptest! {
    #[test]
    fn printing_and_reparsing_loses_nothing(d in arb_draft()) {
        let text = render(&d);
        let a = parse(&text).unwrap_or_else(|e| panic!("generated text must parse: {e}\n{text}"));
        let b = parse(&a.to_string())
            .unwrap_or_else(|e| panic!("printed form must parse: {e}\n{}", a.to_string()));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a.loop_order, &b.loop_order);
        prop_assert_eq!(&a.symmetries, &b.symmetries);
        prop_assert_eq!(a.algebra, b.algebra);
    }

    #[test]
    fn normalization_settles_in_one_step(d in arb_draft()) {
        let a = parse(&render(&d)).unwrap();
        let once = normalize(&a);
        let twice = normalize(&once);
        prop_assert_eq!(once.to_string(), twice.to_string());
        prop_assert_eq!(&once.loop_order, &twice.loop_order);
        prop_assert_eq!(&once.symmetries, &twice.symmetries);
    }
}
