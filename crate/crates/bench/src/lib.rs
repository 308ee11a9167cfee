//! Fixtures shared by the benchmarks.

use nodecoy::{
    build_gmap, expected_frequencies, ChannelScenario, ConstraintSet, GMap, ProtocolKind, ProtocolSpec,
    SourceConfig,
};

/// A protocol at its default cutoff with the matching source, constraints
/// and leakage for a loss-only channel.
pub struct Fixture {
    pub proto: ProtocolSpec,
    pub source: SourceConfig,
    pub channel: ChannelScenario,
    pub g: GMap,
    pub constraints: ConstraintSet,
    pub leakage: f64,
}

pub fn fixture(kind: ProtocolKind, mu: f64, loss_db: f64) -> Fixture {
    let proto = ProtocolSpec::new(kind);
    let source = SourceConfig::new(mu, proto.cutoff, proto.p_z).expect("valid source");
    let channel = ChannelScenario::loss_only(loss_db).expect("valid channel");
    let f = expected_frequencies(&source, &channel, &proto).expect("valid scenario");
    let constraints = ConstraintSet::from_frequencies(&source, &f).expect("valid constraints");
    let leakage = nodecoy::protocol::delta_leak(&proto, &f).expect("valid leakage");
    let g = build_gmap(&proto).expect("valid protocol");
    Fixture {
        proto,
        source,
        channel,
        g,
        constraints,
        leakage,
    }
}
