//! Holds the acceptance run in `tests/acceptance.rs`; it prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.
