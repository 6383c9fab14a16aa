//! Reading and writing chain, cover, flow and test-function files.

use softcap::capacity::Network;
use softcap::io;
use softcap::killed::Rate;

const CHAIN: &str = "\
# chain v1
state left
state mid
state right
rate left mid 2
rate mid left 1
rate mid right 1
rate right mid 2
";

fn main() -> softcap::error::Result<()> {
    let chain = io::parse_chain(CHAIN)?;
    println!("recovered measure {:?}", chain.mu());
    let cover = io::parse_cover(&chain, "R left\nR mid\nS mid\nS right\n")?;
    let flow = io::parse_flow(&chain, "flow BAR:left left 1\nflow left mid 1\nflow mid right 1\nflow right BREVE:right 1\n")?;
    let f = io::parse_testfn(&chain, "testfn left 1\ntestfn mid 0.5\n")?;

    let net = Network::new(&chain, &cover, Rate::Finite(1.0), Rate::Finite(1.0));
    println!("C={:.6} in [{:.6}, {:.6}]", net.capacity()?.value, net.thomson_lower(&flow)?, net.dirichlet_upper(&f)?);

    let dir = std::env::temp_dir().join(format!("softcap-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    io::save_bundle(&chain, &cover, dir.join("three.chain"), dir.join("three.cover"))?;
    print!("{}", std::fs::read_to_string(dir.join("three.chain"))?);
    let back = io::load_chain(dir.join("three.chain"))?;
    assert_eq!(back.mu(), chain.mu());
    std::fs::remove_dir_all(&dir)?;

    match io::parse_chain("# chain v1\nstate a\nrate a b 1\n") {
        Err(e) => println!("bad file: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
