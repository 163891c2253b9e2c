//! Frequency count over three published top-10 rankings, each spelled in
//! its own dataset's naming convention.

use botflow::dataset::NameAliasMap;
use botflow::selection::{derive_universal_set, RankedFeatureList, DEFAULT_THRESHOLD};

fn main() -> botflow::Result<()> {
    let lists = [
        RankedFeatureList::from_names(
            "IoT-23",
            &[
                "Pkt Len Mean", "Bwd Pkt Len Min", "Pkt Len Min", "Pkt Size Avg", "Bwd Header Len",
                "Bwd IAT Max", "Bwd Pkt Len Mean", "Flow Byts/s", "Flow IAT Max", "Fwd Pkt Len Mean",
            ],
        ),
        RankedFeatureList::from_names(
            "CTU-13",
            &[
                "Init Bwd Win Byts", "Bwd Pkts/s", "Flow Pkts/s", "Fwd Pkts/s", "Pkt Len Mean",
                "Pkt Size Avg", "Active Mean", "Active Min", "Bwd IAT Min", "Down/Up Ratio",
            ],
        ),
        RankedFeatureList::from_names(
            "CICIDS-17",
            &[
                "Inbound", "Average Packet Size", "Avg Fwd Segment Size", "Fwd Packet Length Mean",
                "Fwd Packet Length Min", "Min Packet Length", "Packet Length Mean", "URG Flag Count",
                "Down/Up Ratio", "Bwd Packet Length Min",
            ],
        ),
    ];
    let set = derive_universal_set(&lists, &NameAliasMap::standard(), DEFAULT_THRESHOLD)?;
    for m in &set.members {
        println!("{}  {}", m.count, m.name);
    }
    Ok(())
}
