//! Verilog frontend: lexer, parser and the category-structured AST.
//!
//! All entry points are pure functions over immutable inputs and are safe
//! to call from any number of threads.

pub mod ast;
pub mod lexer;
mod parser;
pub mod token;

pub use ast::{AstElement, Category, Diagnostic, Severity, SyntaxDiagnostics, VerilogAst};
pub use lexer::LexError;
pub use token::{Literal, LiteralValue, Span, Token, TokenKind};

use std::path::Path;

/// A piece of Verilog source text together with a label describing where
/// it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceText {
    pub text: String,
    pub origin: String,
}

impl SourceText {
    pub fn inline(text: impl Into<String>) -> Self {
        SourceText {
            text: text.into(),
            origin: "inline".to_string(),
        }
    }

    pub fn labeled(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceText {
            text: text.into(),
            origin: origin.into(),
        }
    }

    /// Reads a UTF-8 source file; the path becomes the origin label.
    pub fn from_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Ok(SourceText {
            text,
            origin: path.display().to_string(),
        })
    }
}

/// Tokenize source text, dropping comments and whitespace.
pub fn tokenize(source: &SourceText) -> Result<Vec<Token>, LexError> {
    lexer::tokenize(&source.text)
}

/// Parse source text into a category-structured AST, or diagnostics when
/// the input is not a single module in the supported subset.
pub fn parse(source: &SourceText) -> Result<VerilogAst, SyntaxDiagnostics> {
    parser::parse_source(&source.text)
}

/// Category → ordered element list view of a parsed AST. Every element of
/// the AST appears in exactly one category list.
pub fn extract_categories(ast: &VerilogAst) -> Vec<(Category, Vec<AstElement>)> {
    Category::ALL
        .iter()
        .map(|c| (*c, ast.elements(*c).to_vec()))
        .collect()
}

pub(crate) use parser::flip_operator;

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(src: &str) -> VerilogAst {
        match parse(&SourceText::inline(src)) {
            Ok(ast) => ast,
            Err(d) => panic!("expected parse success, got: {d}"),
        }
    }

    const AND_GATE: &str = "module and_gate(input a, input b, output y);\n  assign y = a & b;\nendmodule\n";

    #[test]
    fn and_gate_has_expected_elements() {
        let ast = parse_ok(AND_GATE);
        assert_eq!(ast.module_name, "and_gate");
        assert_eq!(ast.elements(Category::Module).len(), 1);
        assert_eq!(ast.elements(Category::Port).len(), 3);
        assert_eq!(ast.elements(Category::Assign).len(), 1);
        let ports: Vec<_> = ast
            .elements(Category::Port)
            .iter()
            .map(|e| e.canonical_name.as_str())
            .collect();
        assert_eq!(ports, ["a", "b", "y"]);
        let assign = &ast.elements(Category::Assign)[0];
        assert_eq!(assign.canonical_name, "assign:y");
        assert_eq!(assign.token_sequence, ["assign", "y", "=", "a", "&", "b"]);
    }

    #[test]
    fn missing_semicolon_yields_diagnostics() {
        let src = "module and_gate(input a, input b, output y);\n  assign y = a & b\nendmodule\n";
        let diags = parse(&SourceText::inline(src)).unwrap_err();
        assert!(!diags.ok());
        assert!(!diags.messages.is_empty());
        assert!(diags.messages[0].line >= 2);
    }

    #[test]
    fn dff_always_block_contains_posedge() {
        let src = "module dff(input clk, input d, output reg q);\n  always @(posedge clk) q <= d;\nendmodule\n";
        let ast = parse_ok(src);
        let always = ast.elements(Category::Always);
        assert_eq!(always.len(), 1);
        assert!(always[0]
            .token_sequence
            .iter()
            .any(|t| t == "posedge"));
        assert_eq!(always[0].canonical_name, "always:q");
    }

    #[test]
    fn empty_module_maps_to_single_module_element() {
        let ast = parse_ok("module m; endmodule");
        let cats = extract_categories(&ast);
        for (c, elems) in cats {
            if c == Category::Module {
                assert_eq!(elems.len(), 1);
                assert_eq!(elems[0].canonical_name, "m");
            } else {
                assert!(elems.is_empty(), "{c} unexpectedly non-empty");
            }
        }
    }

    #[test]
    fn two_always_blocks_preserve_source_order() {
        let src = "module m(input clk, input a, input b, output reg x, output reg y);\n\
                   always @(posedge clk) x <= a;\n\
                   always @(posedge clk) y <= b;\nendmodule";
        let ast = parse_ok(src);
        let names: Vec<_> = ast
            .elements(Category::Always)
            .iter()
            .map(|e| e.canonical_name.clone())
            .collect();
        assert_eq!(names, ["always:x", "always:y"]);
    }

    #[test]
    fn ansi_and_non_ansi_ports_normalize_identically() {
        let ansi = parse_ok("module m(input a, output y); assign y = a; endmodule");
        let nonansi = parse_ok("module m(a, y); input a; output y; assign y = a; endmodule");
        assert_eq!(
            ansi.elements(Category::Port),
            nonansi.elements(Category::Port)
                .iter()
                .cloned()
                .map(|mut e| {
                    // Spans differ between styles; identity and tokens must not.
                    e.span = ansi
                        .elements(Category::Port)
                        .iter()
                        .find(|p| p.canonical_name == e.canonical_name)
                        .unwrap()
                        .span;
                    e
                })
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn grouped_declarations_split_per_name() {
        let src = "module m(input a); wire w1, w2; reg [3:0] r1, r2; endmodule";
        let ast = parse_ok(src);
        assert_eq!(ast.elements(Category::NetDecl).len(), 2);
        assert_eq!(ast.elements(Category::RegDecl).len(), 2);
        let r2 = &ast.elements(Category::RegDecl)[1];
        assert_eq!(r2.canonical_name, "r2");
        assert_eq!(r2.token_sequence, ["reg", "[", "'h3", ":", "'h0", "]", "r2"]);
    }

    #[test]
    fn comment_and_whitespace_changes_leave_ast_unchanged(){
        let base = parse_ok(AND_GATE);
        let noisy = "module /* hdr */ and_gate(input a,\n\n input b, // b in\n output y);\n\
                     \tassign y = a \t& b; // logic\nendmodule // done\n";
        let noisy_ast = parse_ok(noisy);
        assert_eq!(base.module_name, noisy_ast.module_name);
        for c in Category::ALL {
            let lhs: Vec<_> = base
                .elements(c)
                .iter()
                .map(|e| (&e.canonical_name, &e.token_sequence))
                .collect();
            let rhs: Vec<_> = noisy_ast
                .elements(c)
                .iter()
                .map(|e| (&e.canonical_name, &e.token_sequence))
                .collect();
            assert_eq!(lhs, rhs, "category {c} differs");
        }
    }

    #[test]
    fn parse_is_deterministic() {
        let a = parse_ok(AND_GATE);
        let b = parse_ok(AND_GATE);
        assert_eq!(a, b);
    }

    #[test]
    fn multiple_modules_are_rejected() {
        let diags = parse(&SourceText::inline(
            "module a; endmodule\nmodule b; endmodule",
        ))
        .unwrap_err();
        assert!(diags.messages[0].message.contains("multiple modules"));
    }

    #[test]
    fn unsupported_constructs_are_named() {
        let cases = [
            ("module m; generate endgenerate endmodule", "generate"),
            ("module m; initial #10 x = 1; endmodule", "delay"),
            ("module m; initial $display(\"hi\"); endmodule", "$display"),
            ("module m; always @(posedge c) for (;;) x = 1; endmodule", "for"),
        ];
        for (src, needle) in cases {
            let diags = parse(&SourceText::inline(src)).unwrap_err();
            assert!(
                diags.messages[0].message.contains(needle),
                "{src}: {}",
                diags.messages[0].message
            );
        }
    }

    #[test]
    fn instances_parse_with_named_and_positional_connections() {
        let src = "module top(input a, input b, output y, output z);\n\
                   and_gate u1 (.a(a), .b(b), .y(y));\n\
                   and_gate u2 (a, b, z);\n\
                   and g3 (z, a, b);\nendmodule";
        let ast = parse_ok(src);
        let names: Vec<_> = ast
            .elements(Category::Instance)
            .iter()
            .map(|e| e.canonical_name.clone())
            .collect();
        assert_eq!(names, ["u1", "u2", "g3"]);
    }

    #[test]
    fn unnamed_gate_instance_gets_synthesized_name() {
        let src = "module top(input a, input b, output y); and (y, a, b); endmodule";
        let ast = parse_ok(src);
        assert_eq!(ast.elements(Category::Instance)[0].canonical_name, "and:y");
    }

    #[test]
    fn parameters_and_localparams_are_parameter_elements() {
        let src = "module m #(parameter W = 8, D = 2) (input a);\n\
                   localparam HALF = W / 2;\nendmodule";
        let ast = parse_ok(src);
        let names: Vec<_> = ast
            .elements(Category::Parameter)
            .iter()
            .map(|e| e.canonical_name.clone())
            .collect();
        assert_eq!(names, ["W", "D", "HALF"]);
        assert_eq!(
            ast.elements(Category::Parameter)[1].token_sequence[0],
            "parameter"
        );
    }

    #[test]
    fn case_statement_and_concat_lvalues_parse() {
        let src = "module m(input [1:0] s, input a, input b, output reg y, output reg z);\n\
                   always @(*) begin\n\
                     case (s)\n\
                       2'b00: {y, z} = {a, b};\n\
                       2'b01, 2'b10: y = a | b;\n\
                       default: y = 1'b0;\n\
                     endcase\n\
                   end\nendmodule";
        let ast = parse_ok(src);
        assert_eq!(ast.elements(Category::Always)[0].canonical_name, "always:y,z");
    }

    #[test]
    fn function_declaration_parses() {
        let src = "module m(input [3:0] a, output [3:0] y);\n\
                   function [3:0] inc;\n\
                     input [3:0] v;\n\
                     inc = v + 1;\n\
                   endfunction\n\
                   assign y = inc(a);\nendmodule";
        let ast = parse_ok(src);
        assert_eq!(ast.elements(Category::FunctionDecl).len(), 1);
        assert_eq!(ast.elements(Category::FunctionDecl)[0].canonical_name, "inc");
    }

    #[test]
    fn initial_block_lands_in_other() {
        let src = "module m(output reg q); initial q = 1'b0; endmodule";
        let ast = parse_ok(src);
        assert_eq!(ast.elements(Category::Other).len(), 1);
        assert_eq!(ast.elements(Category::Other)[0].canonical_name, "initial:q");
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let mut expr = String::from("a");
        for _ in 0..2000 {
            expr = format!("({expr})");
        }
        let src = format!("module m(input a, output y); assign y = {expr}; endmodule");
        let diags = parse(&SourceText::inline(&src)).unwrap_err();
        assert!(diags.messages[0].message.contains("nesting too deep"));
    }

    #[test]
    fn every_input_terminates_with_ast_or_diagnostics() {
        // A grab-bag of hostile inputs; none may panic.
        let cases = [
            "",
            ";",
            "module",
            "module ;",
            "module m(; endmodule",
            "module m; assign = 1; endmodule",
            "module m; wire w = ; endmodule",
            "endmodule module",
            "module m; always begin end endmodule",
            "module m; assign y = 4'; endmodule",
            "module m(input a output y); endmodule",
            "\u{2764}\u{fe0f} module m; endmodule",
        ];
        for src in cases {
            let _ = parse(&SourceText::inline(src));
        }
    }

    #[test]
    fn canonical_json_has_stable_shape() {
        let ast = parse_ok(AND_GATE);
        let json = ast.to_canonical_json(AND_GATE);
        let text = serde_json::to_string(&json).unwrap();
        assert!(text.contains("\"module_name\":\"and_gate\""));
        let again = serde_json::to_string(&parse_ok(AND_GATE).to_canonical_json(AND_GATE)).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn mutation_sites_are_collected() {
        let src = "module dff(input clk, input rst, input d, output reg q);\n\
                   always @(posedge clk) begin\n\
                     if (rst) q <= 1'b0; else q <= d;\n\
                   end\nendmodule";
        let ast = parse_ok(src);
        assert_eq!(ast.mutation_sites.if_else.len(), 1);
        assert_eq!(ast.mutation_sites.literals.len(), 1);
        let and_ast = parse_ok(AND_GATE);
        assert_eq!(and_ast.mutation_sites.operators.len(), 1);
        assert_eq!(and_ast.mutation_sites.operators[0].1, "&");
    }
}
