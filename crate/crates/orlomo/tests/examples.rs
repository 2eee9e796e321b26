macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(quickstart);
example!(compare_algorithms);
example!(verify_lemmas);
example!(worked_example);
example!(heterogeneous_workers);
example!(extreme_delay);
example!(sweep_grid);
example!(manual_loop);
example!(trace_files);

#[test]
fn quickstart_runs() {
    quickstart::run_example().expect("quickstart should run");
}

#[test]
fn compare_algorithms_runs() {
    compare_algorithms::run_example().expect("comparison should run");
}

#[test]
fn verify_lemmas_runs() {
    verify_lemmas::run_example().expect("verification example should run");
}

#[test]
fn worked_example_runs() {
    worked_example::run_example().expect("worked example should run");
}

#[test]
fn heterogeneous_workers_runs() {
    heterogeneous_workers::run_example().expect("heterogeneity example should run");
}

#[test]
fn extreme_delay_runs() {
    extreme_delay::run_example().expect("extreme delay example should run");
}

#[test]
fn sweep_grid_runs() {
    sweep_grid::run_example().expect("sweep example should run");
}

#[test]
fn manual_loop_runs() {
    manual_loop::run_example().expect("manual loop should run");
}

#[test]
fn trace_files_runs() {
    trace_files::run_example().expect("trace file example should run");
}
