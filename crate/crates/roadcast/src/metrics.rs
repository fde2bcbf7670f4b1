//! Per-packet bookkeeping and the three headline metrics: delivery rate,
//! forwarding redundancy, and end-to-end latency.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use crate::engine::SimTime;
use crate::protocols::PacketId;
use crate::NodeId;

/// Global ledger entry for one packet: who received it first and when, and
/// who transmitted it.
#[derive(Debug, Clone)]
pub struct PacketRecord {
    pub id: PacketId,
    pub origin: NodeId,
    pub sent_at: SimTime,
    /// First reception time per node; the origin never appears here.
    pub receptions: BTreeMap<NodeId, SimTime>,
    /// Nodes that transmitted the packet, excluding the origin's initial
    /// send. A node transmitting twice still counts once here.
    pub forwarders: BTreeSet<NodeId>,
    /// Raw transmissions per node, initial send included.
    pub tx_by_node: BTreeMap<NodeId, u32>,
    pub node_count_at_send: u32,
    pub(crate) origin_sent: bool,
}

impl PacketRecord {
    pub fn new(id: PacketId, sent_at: SimTime, node_count_at_send: u32) -> PacketRecord {
        PacketRecord {
            id,
            origin: id.origin,
            sent_at,
            receptions: BTreeMap::new(),
            forwarders: BTreeSet::new(),
            tx_by_node: BTreeMap::new(),
            node_count_at_send,
            origin_sent: false,
        }
    }

    /// Total transmissions of this packet across all nodes.
    pub fn tx_count(&self) -> u32 {
        self.tx_by_node.values().sum()
    }
}

/// Mean end-to-end delay over all first receptions, seconds. `None` when
/// nobody received the packet — reported as an empty cell, never as zero.
pub fn latency(rec: &PacketRecord) -> Option<f64> {
    if rec.receptions.is_empty() {
        return None;
    }
    let total: f64 = rec
        .receptions
        .values()
        .map(|t| t.secs() - rec.sent_at.secs())
        .sum();
    Some(total / rec.receptions.len() as f64)
}

/// Fraction of potential receivers (all nodes minus the origin) that got
/// the packet.
pub fn pdr(rec: &PacketRecord) -> f64 {
    assert!(rec.node_count_at_send >= 2, "pdr needs at least two nodes");
    rec.receptions.len() as f64 / f64::from(rec.node_count_at_send - 1)
}

/// Fraction of nodes that acted as forwarders for the packet.
pub fn redundancy(rec: &PacketRecord) -> f64 {
    assert!(rec.node_count_at_send >= 1);
    rec.forwarders.len() as f64 / f64::from(rec.node_count_at_send)
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    /// The per-origin sequence number; packets are sent by a single source,
    /// so this is the packet's plot-axis identity.
    pub packet_seq: u32,
    pub send_time_s: f64,
    pub pdr: f64,
    pub redundancy: f64,
    pub latency_s: Option<f64>,
    pub tx_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub packets: usize,
    pub mean_pdr: f64,
    pub mean_redundancy: f64,
    /// Mean over packets with at least one receiver; `None` if none have.
    pub mean_latency_s: Option<f64>,
    pub mean_tx_count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
    pub summary: MetricsSummary,
}

/// One row per packet ordered by send time, plus a summary of means.
pub fn aggregate(records: &[PacketRecord]) -> MetricsTable {
    let mut rows: Vec<MetricsRow> = records
        .iter()
        .map(|rec| MetricsRow {
            packet_seq: rec.id.seq,
            send_time_s: rec.sent_at.secs(),
            pdr: pdr(rec),
            redundancy: redundancy(rec),
            latency_s: latency(rec),
            tx_count: rec.tx_count(),
        })
        .collect();
    rows.sort_by(|a, b| {
        a.send_time_s
            .total_cmp(&b.send_time_s)
            .then(a.packet_seq.cmp(&b.packet_seq))
    });
    let summary = summarize(&rows);
    MetricsTable { rows, summary }
}

pub fn summarize(rows: &[MetricsRow]) -> MetricsSummary {
    let n = rows.len();
    let mean = |f: &dyn Fn(&MetricsRow) -> f64| -> f64 {
        if n == 0 {
            0.0
        } else {
            rows.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.latency_s).collect();
    MetricsSummary {
        packets: n,
        mean_pdr: mean(&|r| r.pdr),
        mean_redundancy: mean(&|r| r.redundancy),
        mean_latency_s: if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        },
        mean_tx_count: mean(&|r| f64::from(r.tx_count)),
    }
}

pub const METRICS_HEADER: &str = "packet_id,send_time_s,pdr,redundancy,latency_s,tx_count";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Write the per-packet table; undefined metrics become empty cells.
pub fn write_metrics_csv(table: &MetricsTable, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{},{}",
            r.packet_seq,
            r.send_time_s,
            r.pdr,
            r.redundancy,
            fmt_opt(r.latency_s),
            r.tx_count
        )?;
    }
    Ok(())
}

pub const SUMMARY_HEADER: &str =
    "packets,mean_pdr,mean_redundancy,mean_latency_s,mean_tx_count";

pub fn write_summary_csv(table: &MetricsTable, w: &mut dyn Write) -> io::Result<()> {
    let s = &table.summary;
    writeln!(w, "{SUMMARY_HEADER}")?;
    writeln!(
        w,
        "{},{:?},{:?},{},{:?}",
        s.packets,
        s.mean_pdr,
        s.mean_redundancy,
        fmt_opt(s.mean_latency_s),
        s.mean_tx_count
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(receivers: &[(u32, f64)], forwarders: &[u32], n: u32) -> PacketRecord {
        let id = PacketId {
            origin: NodeId(0),
            seq: 1,
        };
        let mut rec = PacketRecord::new(id, SimTime::from_secs(10.0), n);
        for (node, at) in receivers {
            rec.receptions
                .insert(NodeId(*node), SimTime::from_secs(10.0 + at));
        }
        for f in forwarders {
            rec.forwarders.insert(NodeId(*f));
            *rec.tx_by_node.entry(NodeId(*f)).or_insert(0) += 1;
        }
        *rec.tx_by_node.entry(NodeId(0)).or_insert(0) += 1;
        rec
    }

    #[test]
    fn latency_is_the_mean_of_first_receptions() {
        let rec = record(&[(1, 0.001), (2, 0.003)], &[], 3);
        assert!((latency(&rec).unwrap() - 0.002).abs() < 1e-15);
        let rec = record(&[(1, 0.0013)], &[], 3);
        assert!((latency(&rec).unwrap() - 0.0013).abs() < 1e-15);
    }

    #[test]
    fn latency_undefined_without_receivers() {
        let rec = record(&[], &[], 3);
        assert_eq!(latency(&rec), None);
    }

    #[test]
    fn pdr_counts_non_origin_nodes() {
        let all: Vec<(u32, f64)> = (1..200).map(|i| (i, 0.001)).collect();
        let rec = record(&all, &[], 200);
        assert_eq!(pdr(&rec), 1.0);
        let rec = record(&[], &[], 200);
        assert_eq!(pdr(&rec), 0.0);
    }

    #[test]
    fn redundancy_excludes_origin_initial_send() {
        let receivers: Vec<(u32, f64)> = (1..10).map(|i| (i, 0.001)).collect();
        let forwarders: Vec<u32> = (1..10).collect();
        let rec = record(&receivers, &forwarders, 10);
        assert_eq!(redundancy(&rec), 0.9);
        let rec = record(&receivers, &[], 10);
        assert_eq!(redundancy(&rec), 0.0);
    }

    #[test]
    fn aggregate_of_empty_input_is_header_only() {
        let table = aggregate(&[]);
        assert!(table.rows.is_empty());
        let mut buf = Vec::new();
        write_metrics_csv(&table, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn single_record_summary_equals_the_row() {
        let rec = record(&[(1, 0.002)], &[1], 4);
        let table = aggregate(&[rec]);
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.summary.mean_pdr, table.rows[0].pdr);
        assert_eq!(table.summary.mean_redundancy, table.rows[0].redundancy);
        assert_eq!(table.summary.mean_latency_s, table.rows[0].latency_s);
    }

    #[test]
    fn undefined_latency_cell_renders_empty() {
        let rec = record(&[], &[], 3);
        let table = aggregate(&[rec]);
        let mut buf = Vec::new();
        write_metrics_csv(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[4], "");
    }
}
