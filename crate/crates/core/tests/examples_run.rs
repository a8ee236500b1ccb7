//! Runs every example so they stay in sync with the library.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[path = $path]
        mod $name;

        #[test]
        fn $name() {
            $name::main();
        }
    };
}

example!(projection, "../examples/projection.rs");
example!(simulate, "../examples/simulate.rs");
example!(approximate, "../examples/approximate.rs");
example!(solve, "../examples/solve.rs");
example!(certificate, "../examples/certificate.rs");
example!(coderivative, "../examples/coderivative.rs");
example!(example81, "../examples/example81.rs");
example!(study, "../examples/study.rs");
example!(problem_file, "../examples/problem_file.rs");
