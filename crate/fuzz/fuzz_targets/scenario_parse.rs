#![no_main]

use libfuzzer_sys::fuzz_target;

// The scenario parser must reject arbitrary input with an error, never panic.
// Accepted documents must survive a serialize/reparse round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(scenario) = ptconsensus::scenario::parse_and_validate(text) {
        let doc = ptconsensus::scenario::serialize(&scenario);
        let again = ptconsensus::scenario::parse_and_validate(&doc)
            .expect("serialized form of an accepted scenario must reparse");
        assert_eq!(scenario.alphas, again.alphas);
    }
});
