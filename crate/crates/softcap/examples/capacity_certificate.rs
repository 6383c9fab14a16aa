//! Soft capacity with both variational certificates.

use softcap::capacity::{Flow, Network};
use softcap::killed::Rate;
use softcap::models::{double_well_chain, DoubleWellSpec};

fn main() -> softcap::error::Result<()> {
    let (chain, cover) = double_well_chain(&DoubleWellSpec::canonical(6.0))?;
    for (k, l) in [(1e-3, 1e-3), (1e-1, 1e-3), (1.0, 1.0), (f64::INFINITY, 1.0)] {
        let net = Network::new(&chain, &cover, Rate::from(k), Rate::from(l));
        let cert = net.capacity()?;
        println!(
            "kappa={:<8} lambda={:<8} C={:.6e} gap={:.1e} phi_kl={:.4e}",
            net.kappa.to_string(),
            net.lambda.to_string(),
            cert.value, cert.duality_gap, cert.phi_kl
        );
    }

    // both constraints hard is contradictory on the overlap
    let hard = Network::new(&chain, &cover, Rate::Infinite, Rate::Infinite).capacity();
    println!("kappa=lambda=INF: {}", hard.map(|c| c.value.to_string()).unwrap_or_else(|e| e.to_string()));

    let net = Network::new(&chain, &cover, Rate::Finite(1e-2), Rate::Finite(1e-2));
    let cert = net.capacity()?;
    // a step across the saddle is a decent guess for the potential
    let step: Vec<f64> = (0..chain.n()).map(|x| if x < 5 { 1.0 } else { 0.0 }).collect();
    println!("Dirichlet at step  {:.6e} >= C = {:.6e}", net.dirichlet_upper(&step)?, cert.value);

    // a unit flow straight along the line from the left bottom to the right bottom
    let mut flow = Flow::default();
    flow.add_bar(2, 1.0);
    for x in 2..8 {
        flow.add(x, x + 1, 1.0);
    }
    flow.add_breve(8, 1.0);
    println!("Thomson at path    {:.6e} <= C", net.thomson_lower(&flow)?);
    println!("Thomson at current {:.6e}", net.thomson_lower(&cert.current)?);
    println!("mixture            {:.6e}", net.thomson_lower(&flow.combine(0.5, &cert.current, 0.5))?);
    Ok(())
}
