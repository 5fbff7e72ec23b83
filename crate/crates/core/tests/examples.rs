// Every example doubles as a smoke test.

macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));

            #[test]
            fn runs() {
                run().unwrap();
            }
        }
    };
}

example!(find_maximum);
example!(closest_value);
example!(level_sets);
example!(statistics);
example!(hadamard_functions);
example!(truncated_iteration);
example!(cp_truncation);
example!(tt_rounding);
example!(tensor_files);
example!(cli_pipeline);
