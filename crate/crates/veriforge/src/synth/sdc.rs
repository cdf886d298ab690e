//! Timing-constraint file emission.

use crate::model::{PortDecl, PortDirection};

/// Emits the SDC text for one clock constraint: a create_clock with the
/// period in nanoseconds to four decimal places, plus zero input/output
/// delays on the design ports. Byte-stable across runs.
///
/// The clock attaches to a port named `clk` or `clock` when one exists,
/// and is virtual otherwise (purely combinational designs).
pub fn emit_sdc(clock_ps: f64, ports: &[PortDecl]) -> String {
    let period_ns = clock_ps / 1000.0;
    let clock_port = ports
        .iter()
        .find(|p| p.direction == PortDirection::Input && (p.name == "clk" || p.name == "clock"));
    let mut out = String::new();
    match clock_port {
        Some(port) => out.push_str(&format!(
            "create_clock -name clk -period {period_ns:.4} [get_ports {{{}}}]\n",
            port.name
        )),
        None => out.push_str(&format!("create_clock -name clk -period {period_ns:.4}\n")),
    }
    for port in ports {
        if clock_port.map(|c| c.name == port.name).unwrap_or(false) {
            continue;
        }
        match port.direction {
            PortDirection::Input => out.push_str(&format!(
                "set_input_delay 0 -clock clk [get_ports {{{}}}]\n",
                port.name
            )),
            PortDirection::Output | PortDirection::Inout => out.push_str(&format!(
                "set_output_delay 0 -clock clk [get_ports {{{}}}]\n",
                port.name
            )),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ports() -> Vec<PortDecl> {
        vec![
            PortDecl::new("a", PortDirection::Input, 8),
            PortDecl::new("sum", PortDirection::Output, 9),
        ]
    }

    #[test]
    fn period_is_ns_with_four_decimals() {
        assert!(emit_sdc(500.0, &[]).contains("-period 0.5000"));
        assert!(emit_sdc(180.0, &[]).contains("-period 0.1800"));
        assert!(emit_sdc(1.0, &[]).contains("-period 0.0010"));
    }

    #[test]
    fn io_delays_cover_every_port() {
        let text = emit_sdc(500.0, &ports());
        assert!(text.contains("set_input_delay 0 -clock clk [get_ports {a}]"));
        assert!(text.contains("set_output_delay 0 -clock clk [get_ports {sum}]"));
    }

    #[test]
    fn clock_port_is_attached_and_not_delayed() {
        let mut ports = ports();
        ports.insert(0, PortDecl::new("clk", PortDirection::Input, 1));
        let text = emit_sdc(250.0, &ports);
        assert!(text.contains("create_clock -name clk -period 0.2500 [get_ports {clk}]"));
        assert!(!text.contains("set_input_delay 0 -clock clk [get_ports {clk}]"));
    }

    #[test]
    fn byte_stable_across_calls() {
        assert_eq!(emit_sdc(333.3, &ports()), emit_sdc(333.3, &ports()));
    }
}
