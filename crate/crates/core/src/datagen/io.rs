use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::GenConfig;
use super::split::SnapshotAndStream;
use super::DatagenError;
use crate::model::{
    root_post_of, Forum, HasMemberEdge, KnowsEdge, Lifecycle, LikesEdge, Message, MessageKind,
    Person, SimInstant, TagId, TemporalGraph, UpdateOperation,
};

pub const CONFIG_FILE: &str = "config.json";
pub const SNAPSHOT_DIR: &str = "snapshot";
pub const TEMPORAL_DIR: &str = "temporal";
pub const STREAM_FILE: &str = "stream.ldjson";
const META_FILE: &str = "split.json";
const DELIMITER: u8 = b'|';

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SplitMeta {
    cutoff: SimInstant,
    expired_before_cutoff: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> DatagenError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DatagenError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => DatagenError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatagenError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DatagenError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatagenError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn write_config(dir: &Path, config: &GenConfig) -> Result<(), DatagenError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join(CONFIG_FILE), config)
}

pub fn read_config(dir: &Path) -> Result<GenConfig, DatagenError> {
    read_json(&dir.join(CONFIG_FILE))
}

/// Writes `snapshot/`, `stream.ldjson` and the split metadata under `dir`.
pub fn serialize(data: &SnapshotAndStream, dir: &Path) -> Result<(), DatagenError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_graph(&dir.join(SNAPSHOT_DIR), &data.snapshot)?;
    let path = dir.join(STREAM_FILE);
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut out = BufWriter::new(file);
    for op in &data.stream {
        let line = serde_json::to_string(op).expect("serializable");
        writeln!(out, "{line}").map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))?;
    write_json(
        &dir.join(META_FILE),
        &SplitMeta {
            cutoff: data.cutoff,
            expired_before_cutoff: data.expired_before_cutoff,
        },
    )
}

pub fn deserialize(dir: &Path) -> Result<SnapshotAndStream, DatagenError> {
    let meta: SplitMeta = read_json(&dir.join(META_FILE))?;
    let snapshot = read_graph(&dir.join(SNAPSHOT_DIR))?;
    let path = dir.join(STREAM_FILE);
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut stream = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let op: UpdateOperation = serde_json::from_str(&line).map_err(|e| DatagenError::Parse {
            path: path.clone(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        if !op.payload.admits(op.op_type) {
            return Err(DatagenError::Parse {
                path: path.clone(),
                line: i as u64 + 1,
                message: format!("payload does not match {}", op.op_type),
            });
        }
        stream.push(op);
    }
    Ok(SnapshotAndStream {
        cutoff: meta.cutoff,
        snapshot,
        stream,
        expired_before_cutoff: meta.expired_before_cutoff,
    })
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_tags(tags: &BTreeSet<TagId>) -> String {
    tags.iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn lifecycle_fields(lc: &Lifecycle) -> [String; 2] {
    [lc.creation.to_string(), fmt_opt(lc.deletion)]
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, DatagenError> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut writer = csv::WriterBuilder::new()
            .delimiter(DELIMITER)
            .from_writer(file);
        writer.write_record(header).map_err(|e| csv_err(&path, e))?;
        Ok(Self { path, writer })
    }

    fn row(&mut self, fields: Vec<String>) -> Result<(), DatagenError> {
        self.writer
            .write_record(&fields)
            .map_err(|e| csv_err(&self.path, e))
    }

    fn finish(mut self) -> Result<(), DatagenError> {
        self.writer.flush().map_err(io_err(&self.path))
    }
}

const PERSON_HEADER: &[&str] = &[
    "id",
    "firstName",
    "lastName",
    "countryId",
    "universityId",
    "tagInterests",
    "creationDate",
    "deletionDate",
];
const KNOWS_HEADER: &[&str] = &["person1Id", "person2Id", "creationDate", "deletionDate"];
const FORUM_HEADER: &[&str] = &["id", "moderatorPersonId", "creationDate", "deletionDate"];
const MEMBER_HEADER: &[&str] = &["forumId", "personId", "creationDate", "deletionDate"];
const POST_HEADER: &[&str] = &[
    "id",
    "creatorPersonId",
    "containerForumId",
    "countryId",
    "tagIds",
    "creationDate",
    "deletionDate",
];
const COMMENT_HEADER: &[&str] = &[
    "id",
    "creatorPersonId",
    "replyToMessageId",
    "countryId",
    "tagIds",
    "creationDate",
    "deletionDate",
];
const LIKES_HEADER: &[&str] = &["personId", "messageId", "creationDate", "deletionDate"];

/// Writes one `|`-delimited CSV per entity type into `dir`.
pub fn write_graph(dir: &Path, g: &TemporalGraph) -> Result<(), DatagenError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut t = Table::create(dir, "person.csv", PERSON_HEADER)?;
    for p in &g.persons {
        let [c, d] = lifecycle_fields(&p.lifecycle);
        t.row(vec![
            p.id.to_string(),
            p.first_name.clone(),
            p.last_name.clone(),
            p.country_id.to_string(),
            fmt_opt(p.university_id),
            fmt_tags(&p.tag_interests),
            c,
            d,
        ])?;
    }
    t.finish()?;

    let mut t = Table::create(dir, "knows.csv", KNOWS_HEADER)?;
    for k in &g.knows {
        let [c, d] = lifecycle_fields(&k.lifecycle);
        t.row(vec![
            k.person1_id.to_string(),
            k.person2_id.to_string(),
            c,
            d,
        ])?;
    }
    t.finish()?;

    let mut t = Table::create(dir, "forum.csv", FORUM_HEADER)?;
    for f in &g.forums {
        let [c, d] = lifecycle_fields(&f.lifecycle);
        t.row(vec![
            f.id.to_string(),
            f.moderator_person_id.to_string(),
            c,
            d,
        ])?;
    }
    t.finish()?;

    let mut t = Table::create(dir, "has_member.csv", MEMBER_HEADER)?;
    for m in &g.memberships {
        let [c, d] = lifecycle_fields(&m.lifecycle);
        t.row(vec![m.forum_id.to_string(), m.person_id.to_string(), c, d])?;
    }
    t.finish()?;

    let mut posts = Table::create(dir, "post.csv", POST_HEADER)?;
    let mut comments = Table::create(dir, "comment.csv", COMMENT_HEADER)?;
    for m in &g.messages {
        let [c, d] = lifecycle_fields(&m.lifecycle);
        let (table, link) = match m.kind {
            MessageKind::Post => (&mut posts, fmt_opt(m.container_forum_id)),
            MessageKind::Comment => (&mut comments, fmt_opt(m.reply_to_message_id)),
        };
        table.row(vec![
            m.id.to_string(),
            m.creator_person_id.to_string(),
            link,
            m.country_id.to_string(),
            fmt_tags(&m.creation_tag_ids),
            c,
            d,
        ])?;
    }
    posts.finish()?;
    comments.finish()?;

    let mut t = Table::create(dir, "likes.csv", LIKES_HEADER)?;
    for l in &g.likes {
        let [c, d] = lifecycle_fields(&l.lifecycle);
        t.row(vec![
            l.person_id.to_string(),
            l.message_id.to_string(),
            c,
            d,
        ])?;
    }
    t.finish()
}

/// A parsed CSV row with positional context for error reporting.
struct Row<'a> {
    path: &'a Path,
    line: u64,
    record: csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, message: String) -> DatagenError {
        DatagenError::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message,
        }
    }

    fn raw(&self, i: usize) -> Result<&str, DatagenError> {
        self.record
            .get(i)
            .ok_or_else(|| self.err(format!("missing column {i}")))
    }

    fn parse<T: FromStr>(&self, i: usize) -> Result<T, DatagenError>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(i)?;
        s.parse()
            .map_err(|e| self.err(format!("column {i} ({s:?}): {e}")))
    }

    fn opt<T: FromStr>(&self, i: usize) -> Result<Option<T>, DatagenError>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(i)?.is_empty() {
            Ok(None)
        } else {
            self.parse(i).map(Some)
        }
    }

    fn tags(&self, i: usize) -> Result<BTreeSet<TagId>, DatagenError> {
        let s = self.raw(i)?;
        s.split(';')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|e| self.err(format!("tag {t:?}: {e}"))))
            .collect()
    }

    fn lifecycle(&self, i: usize) -> Result<Lifecycle, DatagenError> {
        Ok(Lifecycle::new(self.parse(i)?, self.opt(i + 1)?))
    }
}

fn read_table<T>(
    dir: &Path,
    name: &str,
    header: &[&str],
    mut f: impl FnMut(&Row) -> Result<T, DatagenError>,
) -> Result<Vec<T>, DatagenError> {
    let path = dir.join(name);
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(DELIMITER)
        .from_reader(file);
    let found = reader.headers().map_err(|e| csv_err(&path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(DatagenError::Parse {
            path,
            line: 1,
            message: format!("unexpected header {found:?}"),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(&path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(DatagenError::Parse {
                path,
                line,
                message: format!("expected {} columns, found {}", header.len(), record.len()),
            });
        }
        out.push(f(&Row {
            path: &path,
            line,
            record,
        })?);
    }
    Ok(out)
}

pub fn read_graph(dir: &Path) -> Result<TemporalGraph, DatagenError> {
    let persons = read_table(dir, "person.csv", PERSON_HEADER, |r| {
        Ok(Person {
            id: r.parse(0)?,
            first_name: r.raw(1)?.to_string(),
            last_name: r.raw(2)?.to_string(),
            country_id: r.parse(3)?,
            university_id: r.opt(4)?,
            tag_interests: r.tags(5)?,
            lifecycle: r.lifecycle(6)?,
        })
    })?;
    let knows = read_table(dir, "knows.csv", KNOWS_HEADER, |r| {
        KnowsEdge::new(r.parse(0)?, r.parse(1)?, r.lifecycle(2)?)
            .ok_or_else(|| r.err("self-loop knows edge".into()))
    })?;
    let forums = read_table(dir, "forum.csv", FORUM_HEADER, |r| {
        Ok(Forum {
            id: r.parse(0)?,
            moderator_person_id: r.parse(1)?,
            lifecycle: r.lifecycle(2)?,
        })
    })?;
    let memberships = read_table(dir, "has_member.csv", MEMBER_HEADER, |r| {
        Ok(HasMemberEdge {
            forum_id: r.parse(0)?,
            person_id: r.parse(1)?,
            lifecycle: r.lifecycle(2)?,
        })
    })?;
    let mut messages = read_table(dir, "post.csv", POST_HEADER, |r| {
        let id = r.parse(0)?;
        Ok(Message {
            id,
            kind: MessageKind::Post,
            creator_person_id: r.parse(1)?,
            container_forum_id: Some(r.parse(2)?),
            reply_to_message_id: None,
            country_id: r.parse(3)?,
            creation_tag_ids: r.tags(4)?,
            lifecycle: r.lifecycle(5)?,
            root_post_id: id,
        })
    })?;
    let mut comment_lines = Vec::new();
    let comments = read_table(dir, "comment.csv", COMMENT_HEADER, |r| {
        comment_lines.push(r.line);
        let id = r.parse(0)?;
        Ok(Message {
            id,
            kind: MessageKind::Comment,
            creator_person_id: r.parse(1)?,
            container_forum_id: None,
            reply_to_message_id: Some(r.parse(2)?),
            country_id: r.parse(3)?,
            creation_tag_ids: r.tags(4)?,
            lifecycle: r.lifecycle(5)?,
            root_post_id: id,
        })
    })?;
    messages.extend(comments);
    let lookup: HashMap<_, _> = messages.iter().map(|m| (m.id, m.clone())).collect();
    let comment_path = dir.join("comment.csv");
    let mut comment_no = 0;
    for m in messages.iter_mut().filter(|m| !m.is_post()) {
        m.root_post_id = root_post_of(m.id, &lookup).map_err(|e| DatagenError::Parse {
            path: comment_path.clone(),
            line: comment_lines[comment_no],
            message: e.to_string(),
        })?;
        comment_no += 1;
    }
    let likes = read_table(dir, "likes.csv", LIKES_HEADER, |r| {
        Ok(LikesEdge {
            person_id: r.parse(0)?,
            message_id: r.parse(1)?,
            lifecycle: r.lifecycle(2)?,
        })
    })?;
    let mut g = TemporalGraph {
        persons,
        knows,
        forums,
        memberships,
        messages,
        likes,
    };
    g.sort_canonical();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, GenConfig};

    #[test]
    fn round_trip_is_structurally_equal() {
        let cfg = GenConfig::with_persons(4, 120);
        let (graph, split) = generate_dataset(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        serialize(&split, dir.path()).unwrap();
        write_graph(&dir.path().join(TEMPORAL_DIR), &graph).unwrap();
        write_config(dir.path(), &cfg).unwrap();
        assert_eq!(deserialize(dir.path()).unwrap(), split);
        assert_eq!(read_graph(&dir.path().join(TEMPORAL_DIR)).unwrap(), graph);
        assert_eq!(read_config(dir.path()).unwrap(), cfg);
    }

    #[test]
    fn empty_graph_gives_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        write_graph(dir.path(), &TemporalGraph::default()).unwrap();
        let text = fs::read_to_string(dir.path().join("knows.csv")).unwrap();
        assert_eq!(text, "person1Id|person2Id|creationDate|deletionDate\n");
        assert_eq!(read_graph(dir.path()).unwrap(), TemporalGraph::default());
    }

    #[test]
    fn corrupt_csv_line_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let g = generate_dataset(&GenConfig::with_persons(4, 30)).unwrap().0;
        write_graph(dir.path(), &g).unwrap();
        let path = dir.path().join("forum.csv");
        let mut lines: Vec<String> = fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        lines[3] = "17|notanumber|2011-01-01T00:00:00.000Z|".into();
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        match read_graph(dir.path()) {
            Err(DatagenError::Parse { path: p, line, .. }) => {
                assert_eq!(line, 4);
                assert!(p.ends_with("forum.csv"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_stream_line_is_named() {
        let cfg = GenConfig::with_persons(4, 60);
        let split = generate_dataset(&cfg).unwrap().1;
        assert!(split.stream.len() > 3);
        let dir = tempfile::tempdir().unwrap();
        serialize(&split, dir.path()).unwrap();
        let path = dir.path().join(STREAM_FILE);
        let mut lines: Vec<String> = fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        lines[2] = "{\"opType\":\"INS9\"}".into();
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        let err = deserialize(dir.path()).unwrap_err();
        assert!(matches!(err, DatagenError::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("stream.ldjson:3"));
    }
}
