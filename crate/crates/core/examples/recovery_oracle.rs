use cogharness::cogfit::recovery::recovery_study;
use cogharness::cogfit::Model;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let n: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    for model in Model::ALL {
        let r = recovery_study(model, n, seed).unwrap();
        let cells: Vec<String> =
            r.param_names.iter().zip(&r.correlations).map(|(n, c)| format!("{n}={c:.3}")).collect();
        println!("{model}: {}", cells.join(" "));
    }
}
