#![no_main]

use libfuzzer_sys::fuzz_target;
use ptconsensus::expr::Expr;

// The expression parser must reject arbitrary input with an error, never
// panic, and accepted expressions must print back to a parseable form.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(expr) = Expr::parse(text, 9) {
        let state = [0.25; 9];
        let _ = expr.eval(1.5, &state);
        let printed = expr.to_string();
        Expr::parse(&printed, 9).expect("printed form of an accepted expression must reparse");
    }
});
