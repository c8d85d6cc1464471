//! Property tests over the pure modules: parser totality and determinism,
//! similarity score ranges and monotonicity, advantage normalization, and
//! filtration boundary semantics.

use proptest::prelude::*;
use verigrade_core::curation::{assess_sample, difficulty_score, Bucket, FiltrationConfig};
use verigrade_core::frontend::{self, Category, SourceText};
use verigrade_core::grpo::{clipped_surrogate, kl_penalty, normalize_group, population_stats};
use verigrade_core::harness::mutate_for_validation;
use verigrade_core::similarity::{ast_score, category_coverage, sequence_similarity, CategoryWeights};

// ----------------------------------------------------------------------
// Random valid-module generator (small, synthesizable, always parses)
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
struct GenModule {
    name: String,
    inputs: Vec<String>,
    assigns: Vec<(String, String)>,
}

impl GenModule {
    fn source(&self) -> String {
        let mut ports: Vec<String> = self.inputs.iter().map(|i| format!("input {i}")).collect();
        ports.extend(self.assigns.iter().map(|(o, _)| format!("output {o}")));
        let body: Vec<String> = self
            .assigns
            .iter()
            .map(|(o, rhs)| format!("  assign {o} = {rhs};"))
            .collect();
        format!(
            "module {}({});\n{}\nendmodule\n",
            self.name,
            ports.join(", "),
            body.join("\n")
        )
    }
}

fn arb_module() -> impl Strategy<Value = GenModule> {
    let name = prop::sample::select(vec!["alu", "ctrl", "dpath", "unit_a", "unit_b"]);
    let input_count = 1usize..4;
    let assign_count = 1usize..4;
    (name, input_count, assign_count, any::<u64>()).prop_map(|(name, ni, na, seed)| {
        let inputs: Vec<String> = (0..ni).map(|i| format!("i{i}")).collect();
        let ops = ["&", "|", "^"];
        let mut x = seed;
        let mut next = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 33) as usize
        };
        let assigns = (0..na)
            .map(|a| {
                let lhs = format!("o{a}");
                let l = &inputs[next() % inputs.len()];
                let r = &inputs[next() % inputs.len()];
                let op = ops[next() % ops.len()];
                let neg = if next() % 2 == 0 { "~" } else { "" };
                (lhs, format!("{neg}{l} {op} {r}"))
            })
            .collect();
        GenModule {
            name: name.to_string(),
            inputs,
            assigns,
        }
    })
}

proptest! {
    #[test]
    fn parser_is_total_on_arbitrary_strings(input in ".*") {
        // Either outcome is fine; panics are not.
        let _ = frontend::parse(&SourceText::inline(input));
    }

    #[test]
    fn parser_is_total_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let _ = frontend::parse(&SourceText::inline(text));
    }

    #[test]
    fn parser_is_total_on_token_soup(
        toks in proptest::collection::vec(
            prop::sample::select(vec![
                "module", "endmodule", "assign", "always", "begin", "end", "if", "else",
                "(", ")", "[", "]", "{", "}", ";", ",", "=", "<=", "@", "#", "&", "|",
                "posedge", "input", "output", "wire", "reg", "x", "y", "clk", "4'b01xz",
                "8'hff", "\"str\"", "$display", "`timescale", "/*", "*/", "//",
            ]),
            0..64,
        )
    ) {
        let text = toks.join(" ");
        let _ = frontend::parse(&SourceText::inline(text));
    }

    #[test]
    fn generated_modules_parse_deterministically(m in arb_module()) {
        let src = SourceText::inline(m.source());
        let a = frontend::parse(&src).expect("generated modules are valid");
        let b = frontend::parse(&src).expect("generated modules are valid");
        prop_assert_eq!(a, b);
    }

    #[test]
    fn comment_injection_never_changes_the_ast(m in arb_module(), salt in any::<u16>()) {
        let clean = m.source();
        let noisy = clean
            .replace(";", &format!("; // c{salt}\n"))
            .replace("module ", "/* hdr */ module ");
        let a = frontend::parse(&SourceText::inline(clean)).expect("valid");
        let b = frontend::parse(&SourceText::inline(noisy)).expect("still valid");
        for c in Category::ALL {
            let toks = |ast: &frontend::VerilogAst| -> Vec<Vec<String>> {
                ast.elements(c).iter().map(|e| e.token_sequence.clone()).collect()
            };
            prop_assert_eq!(toks(&a), toks(&b));
        }
    }

    #[test]
    fn reflexive_score_is_always_one(m in arb_module()) {
        let ast = frontend::parse(&SourceText::inline(m.source())).expect("valid");
        let report = ast_score(&ast, &ast, &CategoryWeights::default());
        prop_assert_eq!(report.clamped_score, 1.0);
    }

    #[test]
    fn pair_scores_stay_in_range(a in arb_module(), b in arb_module()) {
        let x = frontend::parse(&SourceText::inline(a.source())).expect("valid");
        let y = frontend::parse(&SourceText::inline(b.source())).expect("valid");
        let report = ast_score(&x, &y, &CategoryWeights::default());
        prop_assert!((0.0..=1.0).contains(&report.clamped_score));
        for c in &report.per_category {
            prop_assert!((0.0..=1.0).contains(&c.sim));
            prop_assert!((0.0..=1.0).contains(&c.cov));
            prop_assert!((0.0..=1.0).contains(&c.red));
        }
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(
        a in proptest::collection::vec(prop::sample::select(vec!["p","q","r","s"]), 0..24),
        b in proptest::collection::vec(prop::sample::select(vec!["p","q","r","s"]), 0..24),
    ) {
        let s1 = sequence_similarity(&a, &b);
        let s2 = sequence_similarity(&b, &a);
        prop_assert_eq!(s1, s2);
        prop_assert!((0.0..=1.0).contains(&s1));
    }

    #[test]
    fn coverage_and_redundancy_are_bounded(
        g in proptest::collection::vec(prop::sample::select(vec!["a","b","c","d"]), 0..12),
        d in proptest::collection::vec(prop::sample::select(vec!["a","b","c","x"]), 0..12),
    ) {
        let g: Vec<String> = g.into_iter().map(String::from).collect();
        let d: Vec<String> = d.into_iter().map(String::from).collect();
        let (cov, red) = category_coverage(&d, &g);
        prop_assert!((0.0..=1.0).contains(&cov));
        prop_assert!((0.0..=1.0).contains(&red));
    }

    #[test]
    fn advantages_are_centered_and_scaled(
        rewards in proptest::collection::vec(
            prop_oneof![Just(0.0), Just(2.0), 0.1f64..1.1],
            2..16,
        )
    ) {
        let adv = normalize_group(&rewards, 1e-8).unwrap();
        let mean: f64 = adv.iter().sum::<f64>() / adv.len() as f64;
        prop_assert!(mean.abs() <= 1e-9, "mean {mean}");
        let (_, sigma) = population_stats(&rewards);
        if sigma > 0.01 {
            let (_, adv_sigma) = population_stats(&adv);
            prop_assert!(adv_sigma <= 1.0 + 1e-12);
            prop_assert!(adv_sigma >= 0.9999, "std {adv_sigma}");
        }
        if sigma == 0.0 {
            prop_assert!(adv.iter().all(|a| *a == 0.0));
        }
    }

    #[test]
    fn surrogate_is_a_lower_bound_and_tight_inside_the_band(
        rho in 0.01f64..4.0,
        advantage in -3.0f64..3.0,
        epsilon in 0.05f64..0.5,
    ) {
        let s = clipped_surrogate(rho, advantage, epsilon);
        prop_assert!(s <= advantage * rho + 1e-12);
        if (1.0 - epsilon..=1.0 + epsilon).contains(&rho) {
            prop_assert!((s - advantage * rho).abs() <= 1e-12);
        }
    }

    #[test]
    fn kl_estimator_is_nonnegative(
        pairs in proptest::collection::vec((-5.0f64..-0.01, -5.0f64..-0.01), 1..24)
    ) {
        let cur: Vec<f64> = pairs.iter().map(|(c, _)| *c).collect();
        let rf: Vec<f64> = pairs.iter().map(|(_, r)| *r).collect();
        prop_assert!(kl_penalty(&cur, &rf).unwrap() >= 0.0);
    }

    #[test]
    fn kept_samples_get_consistent_difficulty_and_bucket(
        rewards in proptest::collection::vec(
            prop_oneof![Just(0.0), Just(2.0), 0.1f64..1.1],
            8,
        )
    ) {
        let cfg = FiltrationConfig::default();
        let v = assess_sample("p", &rewards, &cfg).unwrap();
        let (mean, std) = population_stats(&rewards);
        let in_band = (cfg.alpha_min..=cfg.alpha_max).contains(&mean) && std > cfg.beta_min_std;
        prop_assert_eq!(v.kept, in_band);
        if v.kept {
            let d = v.difficulty.unwrap();
            let expect = difficulty_score(mean, &cfg).unwrap();
            prop_assert!((d - expect).abs() < 1e-12);
            prop_assert_eq!(v.bucket.unwrap() == Bucket::Hard, d > 0.5);
        } else {
            prop_assert!(v.difficulty.is_none() && v.bucket.is_none());
        }
    }

    #[test]
    fn mutants_of_generated_modules_parse_and_differ(m in arb_module()) {
        let golden = SourceText::inline(m.source());
        let out = mutate_for_validation(&golden).unwrap();
        // Every generated module has at least one binary operator.
        prop_assert!(!out.mutants.is_empty());
        for mutant in &out.mutants {
            prop_assert!(frontend::parse(mutant).is_ok());
            prop_assert_ne!(&mutant.text, &golden.text);
        }
    }
}

/// Every token of an accepted parse lies inside some element span or is
/// module-closing punctuation; nothing is silently dropped.
#[test]
fn accepted_parses_cover_their_tokens() {
    let sources = [
        "module m(input a, output y); assign y = a; endmodule",
        "module m(a, y); input a; output y; wire t; assign t = ~a; assign y = t; endmodule",
        "module m #(parameter W = 4) (input clk, input [3:0] d, output reg [3:0] q);\n\
         always @(posedge clk) q <= d;\nendmodule",
        "module top(input x, output z); inv u1 (.a(x), .y(z)); endmodule",
    ];
    for src in sources {
        let st = SourceText::inline(src);
        let ast = frontend::parse(&st).expect("accepted");
        let spans: Vec<(usize, usize)> = ast.span_index().iter().map(|(_, s)| *s).collect();
        for tok in frontend::tokenize(&st).unwrap() {
            let covered = spans
                .iter()
                .any(|(s, e)| tok.span.0 >= *s && tok.span.1 <= *e);
            assert!(
                covered,
                "token `{}` at {:?} uncovered in `{src}`",
                tok.canonical(),
                tok.span
            );
        }
    }
}
