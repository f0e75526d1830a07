//! The routing engine: wires processing units into the delayed-choice
//! interferometer and pushes exactly one messenger at a time from the source
//! to a detector.
//!
//! Only the units hold mutable state; a messenger never reads or writes
//! another messenger. With one messenger in flight at any time, the only
//! communication between events is through the units' internal vectors and
//! registers.

use std::collections::HashMap;

use crate::dlm::DlmPbs;
use crate::error::{Error, Result};
use crate::message::{Message, Messenger};
use crate::optics::{apply_eom, apply_hwp, apply_phase_shift, EomSetting, PhaseSetting};
use crate::rng::{RngStream, StreamFactory};

/// A processing unit together with whatever state its kind needs.
#[derive(Debug)]
pub enum Unit {
    Source,
    /// Two-input polarizing beam splitter with its own emit stream.
    DlmPbs {
        state: DlmPbs,
        emits: RngStream,
    },
    Hwp {
        theta_fast: f64,
    },
    Eom {
        setting: EomSetting,
    },
    PhaseShift {
        setting: PhaseSetting,
    },
    /// Single-input polarizing splitter (same processor, one input port).
    Wollaston {
        state: DlmPbs,
        emits: RngStream,
    },
    Detector {
        id: u8,
        tally: DetectorTally,
    },
}

impl Unit {
    fn input_ports(&self) -> u8 {
        match self {
            Unit::Source => 0,
            Unit::DlmPbs { .. } => 2,
            Unit::Hwp { .. } | Unit::Eom { .. } | Unit::PhaseShift { .. } => 1,
            Unit::Wollaston { .. } => 1,
            Unit::Detector { .. } => 1,
        }
    }

    fn output_ports(&self) -> u8 {
        match self {
            Unit::Source => 1,
            Unit::DlmPbs { .. } | Unit::Wollaston { .. } => 2,
            Unit::Hwp { .. } | Unit::Eom { .. } | Unit::PhaseShift { .. } => 1,
            Unit::Detector { .. } => 0,
        }
    }
}

/// Per-detector event counts, split by the path label carried by each
/// messenger.
#[derive(Debug, Clone, Copy, Default)]
pub struct DetectorTally {
    pub total: u64,
    pub by_path: [u64; 2],
}

/// A named node in the network.
#[derive(Debug)]
pub struct UnitNode {
    pub name: String,
    pub unit: Unit,
}

/// Waypoint callbacks fired while a messenger is routed.
pub trait EventHooks {
    /// A unit emitted the messenger on `channel` with `message`.
    fn on_unit(&mut self, _event: u64, _unit: &str, _channel: u8, _message: &Message) {}
    /// The per-event modulator choice was made (after the input splitter,
    /// before any unit of the output beam splitter).
    fn on_choice(&mut self, _event: u64, _voltage_on: bool) {}
}

/// Hooks that do nothing.
pub struct NoHooks;

impl EventHooks for NoHooks {}

/// Where a routed messenger ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteOutcome {
    Detected {
        detector: u8,
        path_label: u8,
    },
    /// Absorbed in a blocked arm; never reached a detector.
    Blocked,
}

/// Parameters of the delayed-choice network.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub reflectivity: f64,
    pub phi: f64,
    pub alpha: f64,
    pub hwp_angle: f64,
    /// Arm whose messengers are absorbed, if any.
    pub blocked_arm: Option<u8>,
}

/// Directed network of processing units.
///
/// Every non-detector output port must be wired to exactly one input port,
/// the graph must be acyclic and every path from the source must end at a
/// detector. Fan-in (two wires into one input port) is allowed; the merging
/// splitter's two outputs both continue into the same beam path.
#[derive(Debug)]
pub struct OpticalNetwork {
    nodes: Vec<UnitNode>,
    wires: HashMap<(usize, u8), (usize, u8)>,
    source: usize,
    input_splitter: usize,
    eom: usize,
    merge: usize,
    blocked_arm: Option<u8>,
}

impl OpticalNetwork {
    /// Validate and seal a network.
    pub fn new(
        nodes: Vec<UnitNode>,
        wires: HashMap<(usize, u8), (usize, u8)>,
        input_splitter: usize,
        eom: usize,
        merge: usize,
        blocked_arm: Option<u8>,
    ) -> Result<Self> {
        let sources: Vec<usize> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.unit, Unit::Source))
            .map(|(i, _)| i)
            .collect();
        if sources.len() != 1 {
            return Err(Error::Topology(format!(
                "expected exactly one source, found {}",
                sources.len()
            )));
        }
        let source = sources[0];

        for (i, node) in nodes.iter().enumerate() {
            for port in 0..node.unit.output_ports() {
                let Some(&(to, to_port)) = wires.get(&(i, port)) else {
                    return Err(Error::Topology(format!(
                        "output port {port} of unit '{}' is not wired",
                        node.name
                    )));
                };
                let Some(target) = nodes.get(to) else {
                    return Err(Error::Topology(format!(
                        "wire from '{}' targets missing unit index {to}",
                        node.name
                    )));
                };
                if to_port >= target.unit.input_ports() {
                    return Err(Error::Topology(format!(
                        "wire from '{}' targets invalid input port {to_port} of '{}'",
                        node.name, target.name
                    )));
                }
            }
        }
        for &(from, port) in wires.keys() {
            let ok = nodes
                .get(from)
                .is_some_and(|n| port < n.unit.output_ports());
            if !ok {
                return Err(Error::Topology(format!(
                    "wire leaves nonexistent output port {port} of unit index {from}"
                )));
            }
        }

        // Depth-first walk from the source: no cycles, everything reachable.
        let mut color = vec![0u8; nodes.len()]; // 0 unseen, 1 active, 2 done
        let mut stack = vec![(source, 0u8)];
        while let Some((node, next_port)) = stack.pop() {
            if next_port == 0 {
                color[node] = 1;
            }
            if next_port < nodes[node].unit.output_ports() {
                stack.push((node, next_port + 1));
                let (to, _) = wires[&(node, next_port)];
                match color[to] {
                    1 => {
                        return Err(Error::Topology(format!(
                            "cycle through unit '{}'",
                            nodes[to].name
                        )))
                    }
                    0 => stack.push((to, 0)),
                    _ => {}
                }
            } else {
                color[node] = 2;
            }
        }
        if let Some(unreached) = color.iter().position(|&c| c != 2) {
            return Err(Error::Topology(format!(
                "unit '{}' is not reachable from the source",
                nodes[unreached].name
            )));
        }

        if !matches!(
            nodes.get(input_splitter).map(|n| &n.unit),
            Some(Unit::DlmPbs { .. })
        ) {
            return Err(Error::Topology(
                "input splitter index does not point at a two-input splitter".into(),
            ));
        }
        if !matches!(nodes.get(eom).map(|n| &n.unit), Some(Unit::Eom { .. })) {
            return Err(Error::Topology(
                "eom index does not point at a modulator".into(),
            ));
        }

        Ok(OpticalNetwork {
            nodes,
            wires,
            source,
            input_splitter,
            eom,
            merge,
            blocked_arm,
        })
    }

    pub fn nodes(&self) -> &[UnitNode] {
        &self.nodes
    }

    pub fn blocked_arm(&self) -> Option<u8> {
        self.blocked_arm
    }

    pub fn merge_unit_name(&self) -> &str {
        &self.nodes[self.merge].name
    }

    pub fn detector_tally(&self, id: u8) -> Option<DetectorTally> {
        self.nodes.iter().find_map(|n| match &n.unit {
            Unit::Detector { id: d, tally } if *d == id => Some(*tally),
            _ => None,
        })
    }

    fn set_eom_voltage(&mut self, on: bool) {
        if let Unit::Eom { setting } = &mut self.nodes[self.eom].unit {
            setting.voltage_on = on;
        }
    }

    fn next_hop(&self, from: usize, port: u8) -> Result<(usize, u8)> {
        self.wires.get(&(from, port)).copied().ok_or_else(|| {
            Error::Topology(format!(
                "no wired continuation from output port {port} of unit '{}'",
                self.nodes[from].name
            ))
        })
    }

    /// Route one messenger from the source to a detector (or into a block).
    ///
    /// `choose_voltage` is consulted exactly once, immediately after the
    /// input splitter has emitted the messenger and before any unit of the
    /// output beam splitter processes it; its answer is applied to the
    /// modulator for this event.
    pub fn route_one(
        &mut self,
        event: u64,
        choose_voltage: &mut impl FnMut(u64) -> bool,
        hooks: &mut impl EventHooks,
    ) -> Result<RouteOutcome> {
        let mut messenger = emit_source(event);
        hooks.on_unit(event, "source", messenger.channel, &messenger.message);

        let (mut node, mut port) = self.next_hop(self.source, 0)?;
        loop {
            let splitter_here = node == self.input_splitter;
            let (out_port, out_msg) = {
                let unit_node = &mut self.nodes[node];
                match &mut unit_node.unit {
                    Unit::Source => {
                        return Err(Error::Topology(format!(
                            "messenger routed into source '{}'",
                            unit_node.name
                        )))
                    }
                    Unit::DlmPbs { state, emits } | Unit::Wollaston { state, emits } => {
                        state.process(usize::from(port), &messenger.message, emits)?
                    }
                    Unit::Hwp { theta_fast } => (0, apply_hwp(&messenger.message, *theta_fast)),
                    Unit::Eom { setting } => (0, apply_eom(&messenger.message, setting)),
                    Unit::PhaseShift { setting } => {
                        (0, apply_phase_shift(&messenger.message, setting))
                    }
                    Unit::Detector { id, tally } => {
                        let label = messenger.path_label().ok_or_else(|| {
                            Error::Topology(format!(
                                "messenger reached detector '{}' without a path label",
                                unit_node.name
                            ))
                        })?;
                        tally.total += 1;
                        tally.by_path[usize::from(label)] += 1;
                        let detector = *id;
                        hooks.on_unit(event, &unit_node.name, detector, &messenger.message);
                        return Ok(RouteOutcome::Detected {
                            detector,
                            path_label: label,
                        });
                    }
                }
            };

            messenger.message = out_msg;
            messenger.channel = out_port;
            {
                let name = &self.nodes[node].name;
                hooks.on_unit(event, name, out_port, &messenger.message);
            }

            if splitter_here {
                // The exit channel of the input splitter defines the arm.
                messenger.set_path_label(out_port);
                if self.blocked_arm == Some(out_port) {
                    return Ok(RouteOutcome::Blocked);
                }
                let on = choose_voltage(event);
                self.set_eom_voltage(on);
                hooks.on_choice(event, on);
            }

            let (next, next_port) = self.next_hop(node, out_port)?;
            node = next;
            port = next_port;
        }
    }
}

/// The messenger the source injects: 45-degree polarization (equal H and V
/// amplitude, so the input splitter divides traffic evenly) with both
/// phases zero, entering channel 0 of the input splitter. Event-independent.
pub fn emit_source(_event: u64) -> Messenger {
    let message = Message::from_pairs_unchecked(
        (1.0, 0.0),
        (1.0, 0.0),
        (
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ),
    );
    Messenger::new(message, 0)
}

/// Build the delayed-choice interferometer.
///
/// Topology: source -> input splitter; exit channel 0 (arm 0) passes the
/// phase shifter into port 0 of the merging splitter, exit channel 1
/// (arm 1) goes directly into port 1. Both merge outputs continue through
/// the half-wave plate and the modulator into the single-input Wollaston
/// splitter, whose channels feed detectors D0 and D1.
pub fn build_delayed_choice_network(
    cfg: &NetworkConfig,
    streams: &StreamFactory,
) -> Result<OpticalNetwork> {
    if !(0.0..=0.5).contains(&cfg.reflectivity) {
        return Err(Error::Config(format!(
            "r out of range [0,0.5]: {}",
            cfg.reflectivity
        )));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha out of range (0,1): {}",
            cfg.alpha
        )));
    }
    if !cfg.phi.is_finite() {
        return Err(Error::Config(format!("phi is not finite: {}", cfg.phi)));
    }
    if !cfg.hwp_angle.is_finite() {
        return Err(Error::Config(format!(
            "hwp angle is not finite: {}",
            cfg.hwp_angle
        )));
    }
    if let Some(arm) = cfg.blocked_arm {
        if arm > 1 {
            return Err(Error::Config(format!("blocked arm must be 0 or 1: {arm}")));
        }
    }

    let pbs = |name: &str| -> Result<(DlmPbs, RngStream)> {
        let mut init = streams.stream(&format!("{name}.init"));
        Ok((
            DlmPbs::init(cfg.alpha, &mut init)?,
            streams.stream(&format!("{name}.emit")),
        ))
    };

    let (input_state, input_emits) = pbs("pbs_input")?;
    let (merge_state, merge_emits) = pbs("pbs_merge")?;
    let (woll_state, woll_emits) = pbs("wollaston")?;

    let nodes = vec![
        UnitNode {
            name: "source".into(),
            unit: Unit::Source,
        },
        UnitNode {
            name: "pbs_input".into(),
            unit: Unit::DlmPbs {
                state: input_state,
                emits: input_emits,
            },
        },
        UnitNode {
            name: "phase".into(),
            unit: Unit::PhaseShift {
                setting: PhaseSetting::new(cfg.phi)
                    .map_err(|e| Error::Config(format!("phi: {e}")))?,
            },
        },
        UnitNode {
            name: "pbs_merge".into(),
            unit: Unit::DlmPbs {
                state: merge_state,
                emits: merge_emits,
            },
        },
        UnitNode {
            name: "hwp".into(),
            unit: Unit::Hwp {
                theta_fast: cfg.hwp_angle,
            },
        },
        UnitNode {
            name: "eom".into(),
            unit: Unit::Eom {
                setting: EomSetting::new(cfg.reflectivity, false)
                    .map_err(|e| Error::Config(format!("r: {e}")))?,
            },
        },
        UnitNode {
            name: "wollaston".into(),
            unit: Unit::Wollaston {
                state: woll_state,
                emits: woll_emits,
            },
        },
        UnitNode {
            name: "D0".into(),
            unit: Unit::Detector {
                id: 0,
                tally: DetectorTally::default(),
            },
        },
        UnitNode {
            name: "D1".into(),
            unit: Unit::Detector {
                id: 1,
                tally: DetectorTally::default(),
            },
        },
    ];

    let (source, pbs_input, phase, pbs_merge, hwp, eom, wollaston, d0, d1) =
        (0, 1, 2, 3, 4, 5, 6, 7, 8);
    let wires = HashMap::from([
        ((source, 0), (pbs_input, 0)),
        ((pbs_input, 0), (phase, 0)),
        ((phase, 0), (pbs_merge, 0)),
        ((pbs_input, 1), (pbs_merge, 1)),
        ((pbs_merge, 0), (hwp, 0)),
        ((pbs_merge, 1), (hwp, 0)),
        ((hwp, 0), (eom, 0)),
        ((eom, 0), (wollaston, 0)),
        ((wollaston, 0), (d0, 0)),
        ((wollaston, 1), (d1, 0)),
    ]);

    OpticalNetwork::new(nodes, wires, pbs_input, eom, pbs_merge, cfg.blocked_arm)
}
