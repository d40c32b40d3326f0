use std::io::{BufRead, Write};

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, Event};
use quick_xml::{Reader, Writer};

use super::SimilarityNetwork;
use crate::error::{Error, Result};
use crate::traces::TraceKind;

/// `source,target,weight` rows. Isolated nodes are written with an empty
/// target and weight so that a round trip keeps them.
pub fn write_edge_csv<W: Write>(writer: W, net: &SimilarityNetwork) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "target", "weight"])?;
    for (a, b, weight) in net.named_edges() {
        w.write_record([a, b, &weight.to_string()])?;
    }
    for (name, d) in net.nodes.iter().zip(net.degrees()) {
        if d == 0 {
            w.write_record([name.as_str(), "", ""])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_csv<R: std::io::Read>(reader: R, kind: TraceKind) -> Result<SimilarityNetwork> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut isolated = Vec::new();
    let mut edges = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != 3 {
            return Err(Error::data(format!("row {row}: expected 3 fields, got {}", rec.len())));
        }
        let (a, b, w) = (&rec[0], &rec[1], &rec[2]);
        if a.is_empty() {
            return Err(Error::data(format!("row {row}: empty source")));
        }
        if b.is_empty() && w.is_empty() {
            isolated.push(a.to_string());
            continue;
        }
        let w: f64 = w
            .parse()
            .map_err(|_| Error::data(format!("row {row}: bad weight {w:?}")))?;
        edges.push((a.to_string(), b.to_string(), w));
    }
    SimilarityNetwork::from_named_edges(kind, isolated.iter().map(String::as_str), &edges)
}

const NS: &str = "http://graphml.graphdrawing.org/xmlns";

fn xml_err(err: impl std::fmt::Display) -> Error {
    Error::data(format!("GraphML: {err}"))
}

pub fn write_graphml<W: Write>(writer: W, net: &SimilarityNetwork) -> Result<()> {
    let mut w = Writer::new_with_indent(writer, b' ', 2);
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))
        .map_err(xml_err)?;
    w.write_event(Event::Start(BytesStart::new("graphml").with_attributes([("xmlns", NS)])))
        .map_err(xml_err)?;
    w.write_event(Event::Empty(BytesStart::new("key").with_attributes([
        ("id", "weight"),
        ("for", "edge"),
        ("attr.name", "weight"),
        ("attr.type", "double"),
    ])))
    .map_err(xml_err)?;
    w.write_event(Event::Empty(BytesStart::new("key").with_attributes([
        ("id", "trace"),
        ("for", "graph"),
        ("attr.name", "trace"),
        ("attr.type", "string"),
    ])))
    .map_err(xml_err)?;
    w.write_event(Event::Start(
        BytesStart::new("graph").with_attributes([("id", "G"), ("edgedefault", "undirected")]),
    ))
    .map_err(xml_err)?;
    w.create_element("data")
        .with_attribute(("key", "trace"))
        .write_text_content(quick_xml::events::BytesText::new(net.kind.as_str()))
        .map_err(xml_err)?;
    for name in &net.nodes {
        w.write_event(Event::Empty(BytesStart::new("node").with_attributes([("id", name.as_str())])))
            .map_err(xml_err)?;
    }
    for (a, b, weight) in net.named_edges() {
        w.create_element("edge")
            .with_attributes([("source", a), ("target", b)])
            .write_inner_content(|w| {
                w.create_element("data")
                    .with_attribute(("key", "weight"))
                    .write_text_content(quick_xml::events::BytesText::new(&weight.to_string()))?;
                Ok::<_, std::io::Error>(())
            })
            .map_err(xml_err)?;
    }
    w.write_event(Event::End(BytesEnd::new("graph"))).map_err(xml_err)?;
    w.write_event(Event::End(BytesEnd::new("graphml"))).map_err(xml_err)?;
    w.into_inner().flush()?;
    Ok(())
}

/// Read a network written by [`write_graphml`]. The trace kind comes from
/// the graph's `trace` data element, falling back to `default_kind`.
/// Edges without a weight get weight 1.
pub fn read_graphml<R: BufRead>(reader: R, default_kind: TraceKind) -> Result<SimilarityNetwork> {
    let mut r = Reader::from_reader(reader);
    r.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut nodes = Vec::new();
    let mut edges: Vec<(String, String, f64)> = Vec::new();
    let mut kind = default_kind;
    let mut weight_key = "weight".to_string();
    // Which element the next text node belongs to.
    enum Slot {
        None,
        Trace,
        Weight,
    }
    let mut slot = Slot::None;
    let mut in_edge = false;
    let mut saw_root = false;

    loop {
        let event = r.read_event_into(&mut buf).map_err(xml_err)?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let attr = |name: &[u8]| -> Result<Option<String>> {
                    for a in e.attributes() {
                        let a = a.map_err(xml_err)?;
                        if a.key.as_ref() == name {
                            return Ok(Some(a.unescape_value().map_err(xml_err)?.into_owned()));
                        }
                    }
                    Ok(None)
                };
                match e.name().as_ref() {
                    b"graphml" => saw_root = true,
                    b"key" => {
                        if attr(b"for")?.as_deref() == Some("edge")
                            && attr(b"attr.name")?.as_deref() == Some("weight")
                        {
                            if let Some(id) = attr(b"id")? {
                                weight_key = id;
                            }
                        }
                    }
                    b"node" => {
                        let id = attr(b"id")?.ok_or_else(|| xml_err("node without id"))?;
                        nodes.push(id);
                    }
                    b"edge" => {
                        let s = attr(b"source")?.ok_or_else(|| xml_err("edge without source"))?;
                        let t = attr(b"target")?.ok_or_else(|| xml_err("edge without target"))?;
                        edges.push((s, t, 1.0));
                        in_edge = !is_empty;
                    }
                    b"data" if !is_empty => {
                        let key = attr(b"key")?.unwrap_or_default();
                        slot = if in_edge && key == weight_key {
                            Slot::Weight
                        } else if !in_edge && key == "trace" {
                            Slot::Trace
                        } else {
                            Slot::None
                        };
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(xml_err)?;
                match slot {
                    Slot::Weight => {
                        let w: f64 = text
                            .trim()
                            .parse()
                            .map_err(|_| xml_err(format!("bad weight {text:?}")))?;
                        if let Some(last) = edges.last_mut() {
                            last.2 = w;
                        }
                    }
                    Slot::Trace => kind = text.parse()?,
                    Slot::None => {}
                }
            }
            Event::End(e) => match e.name().as_ref() {
                b"edge" => in_edge = false,
                b"data" => slot = Slot::None,
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !saw_root {
        return Err(xml_err("missing graphml root element"));
    }
    let mut sorted = nodes.clone();
    sorted.sort();
    if let Some(d) = sorted.windows(2).find(|d| d[0] == d[1]) {
        return Err(xml_err(format!("duplicate node {:?}", d[0])));
    }
    SimilarityNetwork::from_named_edges(kind, nodes.iter().map(String::as_str), &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SimilarityNetwork {
        SimilarityNetwork::from_named_edges(
            TraceKind::CoDomainDescription,
            ["lonely"],
            &[
                ("a".into(), "b".into(), 0.1 + 0.2),
                ("c".into(), "b".into(), 1.0),
                ("a&<x>".into(), "c".into(), 1e-7),
            ],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let net = sample();
        let mut buf = Vec::new();
        write_edge_csv(&mut buf, &net).unwrap();
        let back = read_edge_csv(&buf[..], net.kind).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn graphml_round_trip() {
        let net = sample();
        let mut buf = Vec::new();
        write_graphml(&mut buf, &net).unwrap();
        let back = read_graphml(&buf[..], TraceKind::CoDuet).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn bad_inputs() {
        assert!(read_edge_csv(&b"source,target,weight\na,a,1\n"[..], TraceKind::CoDuet).is_err());
        assert!(read_edge_csv(&b"source,target,weight\na,b,-1\n"[..], TraceKind::CoDuet).is_err());
        assert!(read_edge_csv(&b"source,target,weight\na,b,x\n"[..], TraceKind::CoDuet).is_err());
        assert!(read_graphml(&b"<nope/>"[..], TraceKind::CoDuet).is_err());
        assert!(read_graphml(&b"<graphml><graph><edge source='a'/></graph></graphml>"[..], TraceKind::CoDuet).is_err());
    }
}
