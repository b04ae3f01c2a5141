//! Two-layer spline network: forward pass, coefficient gradient and model document.
//!
//! `cargo run --example kan_network -- [seed]`

use kan_lmm::kan::{KanNetwork, KanShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let shape = KanShape::for_dimension(2, 3, 8);
    let net = KanNetwork::init(shape, vec![(-1.0, 1.0), (0.0, 2.0)], seed)?;
    println!("shape {:?}", net.shape());
    println!("parameters {}", net.param_count());
    println!("hidden range {:?}", net.hidden_range());

    let x = [0.25, 1.5];
    let y = net.forward(&x)?;
    println!("f({x:?}) = {y:?}");
    println!("hidden sums {:?}", net.hidden_sums(&x)?);

    // gradient of y_0 with respect to every coefficient, checked against one difference quotient
    let grad = net.gradient(&x, &[1.0, 0.0])?;
    let idx = grad
        .0
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut params = net.parameters().0;
    let step = 1e-6;
    params[idx] += step;
    let mut plus = net.clone();
    plus.set_parameters(&params)?;
    params[idx] -= 2.0 * step;
    let mut minus = net.clone();
    minus.set_parameters(&params)?;
    let fd = (plus.forward(&x)?[0] - minus.forward(&x)?[0]) / (2.0 * step);
    println!("d y0 / d theta[{idx}]: analytic {:.10e}, central difference {fd:.10e}", grad.0[idx]);

    let doc = net.to_document();
    let back = KanNetwork::from_document(&doc)?;
    println!("document {} bytes, round trip exact: {}", doc.len(), back == net);
    Ok(())
}
