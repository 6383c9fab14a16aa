//! The command-line front end driven in-process: generate, inspect, verify.

use softcap::cli::run_with;

fn call(args: &[&str]) -> String {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("softcap").chain(args.iter().copied()), &mut out, &mut err);
    if code != 0 {
        eprintln!("exit {code}: {}", String::from_utf8_lossy(&err));
    }
    String::from_utf8(out).unwrap()
}

fn main() {
    let dir = std::env::temp_dir().join(format!("softcap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let chain = dir.join("dw.chain").display().to_string();
    let cover = dir.join("dw.cover").display().to_string();

    print!("{}", call(&["doublewell", &chain, &cover, "--beta", "6", "--timestamp", "0"]));
    print!("{}", call(&["gap", &chain, "--cover", &cover]));
    print!("{}", call(&["qsm", &chain, &cover, "--lambda", "1e-3"]));
    let tsv = call(&["verify", &chain, &cover, "--kappa-grid", "1e-3", "--lambda-grid", "1e-3", "--timestamp", "0"]);
    for line in tsv.lines().skip(1).take(12) {
        println!("{line}");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
