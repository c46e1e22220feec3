//! Holds the `acceptance` test target, which checks the library end to end
//! against the numbered acceptance criteria and prints one line per
//! criterion. Run it with `cargo test -p hk-echo-verify --test acceptance`.
