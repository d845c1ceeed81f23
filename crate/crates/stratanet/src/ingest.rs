//! Event/roster file parsing, keyword-window-kind filtering, and construction
//! of level-stratified account graphs and collapsed organization graphs.

use crate::error::{Error, Result};
use crate::graph::{
    CollapsedGraph, Event, EventKind, Level, OrgType, RosterEntry, Sector, WeightedDigraph,
};
use chrono::{DateTime, Utc};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone)]
pub struct FilterSpec {
    /// Case-insensitive substrings; empty list keeps everything.
    pub keywords: Vec<String>,
    pub window: (DateTime<Utc>, DateTime<Utc>),
    pub kinds: BTreeSet<EventKind>,
    pub roster_only: bool,
}

impl FilterSpec {
    pub fn new(
        keywords: Vec<String>,
        window: (DateTime<Utc>, DateTime<Utc>),
        kinds: impl IntoIterator<Item = EventKind>,
        roster_only: bool,
    ) -> Result<FilterSpec> {
        if window.0 >= window.1 {
            return Err(Error::invalid("filter window start must precede end"));
        }
        Ok(FilterSpec { keywords, window, kinds: kinds.into_iter().collect(), roster_only })
    }

    fn keeps(&self, e: &Event, roster: &Roster) -> bool {
        if !self.kinds.contains(&e.kind) {
            return false;
        }
        if e.timestamp < self.window.0 || e.timestamp > self.window.1 {
            return false;
        }
        if !self.keywords.is_empty() {
            let text = e.text.as_deref().unwrap_or("").to_lowercase();
            if !self.keywords.iter().any(|k| text.contains(&k.to_lowercase())) {
                return false;
            }
        }
        if self.roster_only {
            if roster.get(&e.account_id).is_none() {
                return false;
            }
            if let Some(t) = &e.target_account_id {
                if roster.get(t).is_none() {
                    return false;
                }
            }
        }
        true
    }
}

/// sha256 hex of the sorted keyword list (graph provenance).
pub fn keyword_hash(keywords: &[String]) -> String {
    let mut sorted: Vec<&str> = keywords.iter().map(|s| s.as_str()).collect();
    sorted.sort_unstable();
    let mut h = Sha256::new();
    for k in sorted {
        h.update(k.as_bytes());
        h.update([0u8]);
    }
    format!("{:x}", h.finalize())
}

fn parse_timestamp(s: &str, line: usize) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::parse(line, format!("bad timestamp `{s}`: {e}")))
}

fn opt_field(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

fn make_event(
    account_id: String,
    target: Option<String>,
    ts: &str,
    kind: &str,
    text: Option<String>,
    line: usize,
) -> Result<Event> {
    if account_id.trim().is_empty() {
        return Err(Error::parse(line, "empty account_id"));
    }
    let kind = EventKind::parse(kind).map_err(|e| Error::parse(line, e.to_string()))?;
    if kind == EventKind::Retweet && target.is_none() {
        return Err(Error::parse(line, "retweet without target_account_id"));
    }
    Ok(Event {
        account_id: account_id.trim().to_string(),
        target_account_id: target,
        timestamp: parse_timestamp(ts, line)?,
        kind,
        text,
    })
}

pub fn parse_events<R: Read>(reader: R, format: EventFormat) -> Result<Vec<Event>> {
    match format {
        EventFormat::Csv => parse_events_csv(reader),
        EventFormat::Jsonl => parse_events_jsonl(reader),
    }
}

fn parse_events_csv<R: Read>(reader: R) -> Result<Vec<Event>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(1, format!("missing column `{name}`")))
    };
    let (ca, ct, cts, ck, ctx) = (
        col("account_id")?,
        col("target_account_id")?,
        col("timestamp")?,
        col("kind")?,
        col("text")?,
    );
    let mut events = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        events.push(make_event(
            rec[ca].to_string(),
            opt_field(&rec[ct]),
            &rec[cts],
            &rec[ck],
            opt_field(&rec[ctx]),
            line,
        )?);
    }
    Ok(events)
}

#[derive(Deserialize)]
struct EventRow {
    account_id: String,
    #[serde(default)]
    target_account_id: Option<String>,
    timestamp: String,
    kind: String,
    #[serde(default)]
    text: Option<String>,
}

fn parse_events_jsonl<R: Read>(reader: R) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EventRow = serde_json::from_str(&line)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        events.push(make_event(
            row.account_id,
            row.target_account_id.and_then(|t| opt_field(&t)),
            &row.timestamp,
            &row.kind,
            row.text.and_then(|t| opt_field(&t)),
            lineno,
        )?);
    }
    Ok(events)
}

/// Validated account roster with organization lookups.
#[derive(Debug, Clone)]
pub struct Roster {
    entries: Vec<RosterEntry>,
    by_account: HashMap<String, usize>,
}

impl Roster {
    pub fn from_entries(entries: Vec<RosterEntry>) -> Result<Roster> {
        let mut by_account = HashMap::new();
        let mut org_info: HashMap<&str, (Sector, OrgType)> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if by_account.insert(e.account_id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate account `{}` in roster", e.account_id)));
            }
            match org_info.get(e.organization_id.as_str()) {
                None => {
                    org_info.insert(&e.organization_id, (e.sector, e.org_type));
                }
                Some(&(s, t)) if s == e.sector && t == e.org_type => {}
                Some(_) => {
                    return Err(Error::invalid(format!(
                        "organization `{}` has inconsistent sector/org_type across accounts",
                        e.organization_id
                    )));
                }
            }
        }
        Ok(Roster { entries, by_account })
    }

    pub fn parse_csv<R: Read>(reader: R) -> Result<Roster> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::parse(1, format!("missing column `{name}`")))
        };
        let (ca, co, cl, cs, ct) = (
            col("account_id")?,
            col("organization_id")?,
            col("level")?,
            col("sector")?,
            col("org_type")?,
        );
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let wrap = |e: Error| Error::parse(line, e.to_string());
            entries.push(RosterEntry {
                account_id: rec[ca].trim().to_string(),
                organization_id: rec[co].trim().to_string(),
                level: Level::parse(&rec[cl]).map_err(wrap)?,
                sector: Sector::parse(&rec[cs]).map_err(wrap)?,
                org_type: OrgType::parse(&rec[ct]).map_err(wrap)?,
            });
        }
        Roster::from_entries(entries)
    }

    pub fn get(&self, account: &str) -> Option<&RosterEntry> {
        self.by_account.get(account).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[RosterEntry] {
        &self.entries
    }

    pub fn accounts_of_level(&self, level: Level) -> impl Iterator<Item = &RosterEntry> {
        self.entries.iter().filter(move |e| e.level == level)
    }

    /// Organization ids in first-appearance order.
    pub fn organizations(&self) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut orgs = Vec::new();
        for e in &self.entries {
            if seen.insert(&e.organization_id, ()).is_none() {
                orgs.push(e.organization_id.clone());
            }
        }
        orgs
    }

    pub fn org_info(&self, org: &str) -> Option<(Sector, OrgType)> {
        self.entries
            .iter()
            .find(|e| e.organization_id == org)
            .map(|e| (e.sector, e.org_type))
    }

    pub fn level_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for e in &self.entries {
            counts[e.level as usize] += 1;
        }
        counts
    }
}

/// One keyword substring per line; `#` starts a comment; blanks ignored.
pub fn parse_keywords<R: Read>(reader: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if !line.is_empty() {
            out.push(line.to_string());
        }
    }
    Ok(out)
}

pub fn filter_events(events: &[Event], spec: &FilterSpec, roster: &Roster) -> Vec<Event> {
    events.iter().filter(|e| spec.keeps(e, roster)).cloned().collect()
}

/// Inverse of [`parse_events`] for the CSV form (quoting as needed).
pub fn write_events_csv<W: Write>(events: &[Event], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["account_id", "target_account_id", "timestamp", "kind", "text"])?;
    for e in events {
        wtr.write_record([
            e.account_id.as_str(),
            e.target_account_id.as_deref().unwrap_or(""),
            &e.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            e.kind.token(),
            e.text.as_deref().unwrap_or(""),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Inverse of [`Roster::parse_csv`].
pub fn write_roster_csv<W: Write>(roster: &[RosterEntry], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["account_id", "organization_id", "level", "sector", "org_type"])?;
    for e in roster {
        wtr.write_record([
            e.account_id.as_str(),
            e.organization_id.as_str(),
            e.level.token(),
            e.sector.token(),
            e.org_type.token(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Build the retweet graph: edge retweeter → original author, weight = count.
/// With `level` set, both endpoints must sit at that level; vertices are that
/// level's roster accounts (otherwise: all roster accounts).
pub fn build_account_graph(
    events: &[Event],
    roster: &Roster,
    level: Option<Level>,
) -> Result<WeightedDigraph> {
    let mut g = WeightedDigraph::new();
    g.meta.level = level;
    for e in roster.entries() {
        if level.is_none() || level == Some(e.level) {
            g.add_vertex(&e.account_id);
        }
    }
    for e in events.iter().filter(|e| e.kind == EventKind::Retweet) {
        let Some(target) = &e.target_account_id else { continue };
        let src_entry = roster
            .get(&e.account_id)
            .ok_or_else(|| Error::invalid(format!("retweet by `{}` not in roster", e.account_id)))?;
        let dst_entry = roster
            .get(target)
            .ok_or_else(|| Error::invalid(format!("retweet of `{target}` not in roster")))?;
        if let Some(l) = level {
            if src_entry.level != l || dst_entry.level != l {
                continue;
            }
        }
        let s = g.vertex(&e.account_id).expect("roster vertex interned");
        let d = g.vertex(target).expect("roster vertex interned");
        g.add_edge(s, d, 1);
    }
    Ok(g)
}

/// Project a backboned account graph onto organizations: all roster orgs stay
/// as vertices; an org pair is connected iff some surviving account edge
/// crosses the two organizations.
pub fn collapse(backboned: &WeightedDigraph, roster: &Roster) -> Result<CollapsedGraph> {
    let mut cg = CollapsedGraph::new(roster.organizations());
    for (s, d, _) in backboned.edges() {
        let src = backboned.name(s);
        let dst = backboned.name(d);
        let src_org = roster
            .get(src)
            .ok_or_else(|| Error::invalid(format!("account `{src}` not in roster")))?
            .organization_id
            .clone();
        let dst_org = roster
            .get(dst)
            .ok_or_else(|| Error::invalid(format!("account `{dst}` not in roster")))?
            .organization_id
            .clone();
        cg.connect(&src_org, &dst_org)?;
    }
    Ok(cg)
}
