//! Indexed, immutable triple store.
//!
//! A [`KnowledgeGraph`] holds one split union (train, train+valid or
//! train+valid+test) together with the entity and relation dictionaries.
//! Integer ids are the identity of every entity and relation; labels are
//! only used for rendering.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type EntityId = u32;
pub type RelationId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }

    pub fn touches(&self, entity: EntityId) -> bool {
        self.head == entity || self.tail == entity
    }
}

/// Counters reported while reading a triple file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub lines: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, String>,
    relations: BTreeMap<RelationId, String>,
    triples: BTreeSet<Triple>,
    index_hr: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    index_tr: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    index_r: HashMap<RelationId, Vec<Triple>>,
    index_e: HashMap<EntityId, Vec<Triple>>,
    stats: LoadStats,
}

fn default_entity_label(id: EntityId) -> String {
    format!("ent_{id}")
}

fn default_relation_label(id: RelationId) -> String {
    format!("rel_{id}")
}

impl KnowledgeGraph {
    /// Builds a graph whose dictionaries are exactly the ids used by
    /// `triples`, with default labels.
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let triples: BTreeSet<Triple> = triples.into_iter().collect();
        let mut entities = BTreeMap::new();
        let mut relations = BTreeMap::new();
        for t in &triples {
            entities
                .entry(t.head)
                .or_insert_with(|| default_entity_label(t.head));
            entities
                .entry(t.tail)
                .or_insert_with(|| default_entity_label(t.tail));
            relations
                .entry(t.relation)
                .or_insert_with(|| default_relation_label(t.relation));
        }
        Self::build(entities, relations, triples, LoadStats::default())
    }

    /// Builds a graph over explicit dictionaries. Every triple must resolve.
    pub fn with_dictionaries(
        entities: BTreeMap<EntityId, String>,
        relations: BTreeMap<RelationId, String>,
        triples: impl IntoIterator<Item = Triple>,
    ) -> Result<Self> {
        let triples: BTreeSet<Triple> = triples.into_iter().collect();
        for t in &triples {
            for e in [t.head, t.tail] {
                if !entities.contains_key(&e) {
                    return Err(Error::UnknownEntity(e));
                }
            }
            if !relations.contains_key(&t.relation) {
                return Err(Error::UnknownRelation(t.relation));
            }
        }
        Ok(Self::build(entities, relations, triples, LoadStats::default()))
    }

    fn build(
        entities: BTreeMap<EntityId, String>,
        relations: BTreeMap<RelationId, String>,
        triples: BTreeSet<Triple>,
        stats: LoadStats,
    ) -> Self {
        let mut index_hr: HashMap<_, Vec<EntityId>> = HashMap::new();
        let mut index_tr: HashMap<_, Vec<EntityId>> = HashMap::new();
        let mut index_r: HashMap<_, Vec<Triple>> = HashMap::new();
        let mut index_e: HashMap<_, Vec<Triple>> = HashMap::new();
        // BTreeSet iteration is sorted, so every index list comes out sorted.
        for &t in &triples {
            index_hr.entry((t.head, t.relation)).or_default().push(t.tail);
            index_tr.entry((t.tail, t.relation)).or_default().push(t.head);
            index_r.entry(t.relation).or_default().push(t);
            index_e.entry(t.head).or_default().push(t);
            if t.tail != t.head {
                index_e.entry(t.tail).or_default().push(t);
            }
        }
        for heads in index_tr.values_mut() {
            heads.sort_unstable();
        }
        for list in index_e.values_mut() {
            list.sort_unstable();
        }
        KnowledgeGraph {
            entities,
            relations,
            triples,
            index_hr,
            index_tr,
            index_r,
            index_e,
            stats,
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entities.keys().copied()
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.relations.keys().copied()
    }

    pub fn entities(&self) -> &BTreeMap<EntityId, String> {
        &self.entities
    }

    pub fn relations(&self) -> &BTreeMap<RelationId, String> {
        &self.relations
    }

    pub fn has_entity(&self, id: EntityId) -> bool {
        self.entities.contains_key(&id)
    }

    pub fn has_relation(&self, id: RelationId) -> bool {
        self.relations.contains_key(&id)
    }

    /// Label of an entity, falling back to the default label for ids outside
    /// the dictionary.
    pub fn entity_label(&self, id: EntityId) -> std::borrow::Cow<'_, str> {
        match self.entities.get(&id) {
            Some(label) => label.as_str().into(),
            None => default_entity_label(id).into(),
        }
    }

    pub fn relation_label(&self, id: RelationId) -> std::borrow::Cow<'_, str> {
        match self.relations.get(&id) {
            Some(label) => label.as_str().into(),
            None => default_relation_label(id).into(),
        }
    }

    /// Sorted tails `t` with `(head, relation, t)` in the graph.
    pub fn tails(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.index_hr
            .get(&(head, relation))
            .map_or(&[], Vec::as_slice)
    }

    /// Sorted heads `h` with `(h, relation, tail)` in the graph.
    pub fn heads(&self, tail: EntityId, relation: RelationId) -> &[EntityId] {
        self.index_tr
            .get(&(tail, relation))
            .map_or(&[], Vec::as_slice)
    }

    pub fn by_relation(&self, relation: RelationId) -> &[Triple] {
        self.index_r.get(&relation).map_or(&[], Vec::as_slice)
    }

    /// Every triple with `entity` as head or tail, sorted.
    pub fn neighbors(&self, entity: EntityId) -> Result<&[Triple]> {
        if !self.has_entity(entity) {
            return Err(Error::UnknownEntity(entity));
        }
        Ok(self.index_e.get(&entity).map_or(&[], Vec::as_slice))
    }

    /// Triples whose tail is `entity`.
    pub fn incoming(&self, entity: EntityId) -> impl Iterator<Item = &Triple> + '_ {
        self.index_e
            .get(&entity)
            .into_iter()
            .flatten()
            .filter(move |t| t.tail == entity)
    }

    /// Returns a new graph holding `self ∪ extra`. Ids in `extra` that are
    /// missing from the dictionaries are added with default labels.
    pub fn merge(&self, extra: &[Triple]) -> KnowledgeGraph {
        let mut entities = self.entities.clone();
        let mut relations = self.relations.clone();
        for t in extra {
            entities
                .entry(t.head)
                .or_insert_with(|| default_entity_label(t.head));
            entities
                .entry(t.tail)
                .or_insert_with(|| default_entity_label(t.tail));
            relations
                .entry(t.relation)
                .or_insert_with(|| default_relation_label(t.relation));
        }
        let mut triples = self.triples.clone();
        triples.extend(extra.iter().copied());
        Self::build(entities, relations, triples, LoadStats::default())
    }

    /// Merges dictionaries and triples of two graphs. Labels from `self` win
    /// on conflicts.
    pub fn union(&self, other: &KnowledgeGraph) -> KnowledgeGraph {
        let mut entities = other.entities.clone();
        entities.extend(self.entities.iter().map(|(k, v)| (*k, v.clone())));
        let mut relations = other.relations.clone();
        relations.extend(self.relations.iter().map(|(k, v)| (*k, v.clone())));
        let mut triples = self.triples.clone();
        triples.extend(other.triples.iter().copied());
        Self::build(entities, relations, triples, LoadStats::default())
    }

    pub fn is_subgraph_of(&self, other: &KnowledgeGraph) -> bool {
        self.len() <= other.len() && self.triples.iter().all(|t| other.contains(t))
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_id(field: &str, path: &Path, line: usize, what: &str) -> Result<u32> {
    field.trim().parse().map_err(|_| Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: format!("invalid {what} id `{field}`"),
    })
}

/// Reads `id<TAB>label` lines.
fn read_labels(path: &Path) -> Result<BTreeMap<u32, String>> {
    let text = read_to_string(path)?;
    let mut labels = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, label) = line.split_once('\t').ok_or_else(|| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: "expected `id<TAB>label`".into(),
        })?;
        let id = parse_id(id, path, i + 1, "label")?;
        labels.insert(id, label.to_string());
    }
    Ok(labels)
}

/// Reads tab-separated `head relation tail` lines.
pub fn read_triples(path: &Path) -> Result<(Vec<Triple>, LoadStats)> {
    let text = read_to_string(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut stats = LoadStats::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let t = Triple::new(
            parse_id(fields[0], path, i + 1, "entity")?,
            parse_id(fields[1], path, i + 1, "relation")?,
            parse_id(fields[2], path, i + 1, "entity")?,
        );
        if seen.insert(t) {
            out.push(t);
        } else {
            stats.duplicates += 1;
        }
    }
    Ok((out, stats))
}

/// Loads `<dir>/<split>.txt`, using `entity_labels.tsv` and
/// `relation_labels.tsv` as dictionaries when present.
///
/// With a label file present, the file is the whole dictionary for its kind
/// and every id in the triple file must be listed there.
pub fn load_split(dir: impl AsRef<Path>, split: &str) -> Result<KnowledgeGraph> {
    let dir = dir.as_ref();
    let path = dir.join(format!("{split}.txt"));
    let (triples, stats) = read_triples(&path)?;

    let ent_path = dir.join("entity_labels.tsv");
    let rel_path = dir.join("relation_labels.tsv");
    let entity_labels = ent_path
        .exists()
        .then(|| read_labels(&ent_path))
        .transpose()?;
    let relation_labels = rel_path
        .exists()
        .then(|| read_labels(&rel_path))
        .transpose()?;

    let mut entities = entity_labels.clone().unwrap_or_default();
    let mut relations = relation_labels.clone().unwrap_or_default();
    for (line, t) in triples.iter().enumerate() {
        let unknown = |kind: &str, id: u32, file: &Path| Error::Malformed {
            path: path.clone(),
            line: line + 1,
            message: format!("{kind} id {id} is not listed in {}", file.display()),
        };
        for e in [t.head, t.tail] {
            if entity_labels.is_some() {
                if !entities.contains_key(&e) {
                    return Err(unknown("entity", e, &ent_path));
                }
            } else {
                entities.entry(e).or_insert_with(|| default_entity_label(e));
            }
        }
        if relation_labels.is_some() {
            if !relations.contains_key(&t.relation) {
                return Err(unknown("relation", t.relation, &rel_path));
            }
        } else {
            relations
                .entry(t.relation)
                .or_insert_with(|| default_relation_label(t.relation));
        }
    }
    Ok(KnowledgeGraph::build(
        entities,
        relations,
        triples.into_iter().collect(),
        stats,
    ))
}

/// The three nested graphs used by the easy/hard answer protocol.
#[derive(Debug, Clone)]
pub struct SplitGraphs {
    pub train: KnowledgeGraph,
    pub train_valid: KnowledgeGraph,
    pub train_valid_test: KnowledgeGraph,
}

impl SplitGraphs {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let train = load_split(dir, "train")?;
        let valid = load_split(dir, "valid")?;
        let test = load_split(dir, "test")?;
        let train_valid = train.union(&valid);
        let train_valid_test = train_valid.union(&test);
        Ok(SplitGraphs {
            train,
            train_valid,
            train_valid_test,
        })
    }

    pub fn from_parts(train: KnowledgeGraph, valid: &[Triple], test: &[Triple]) -> Self {
        let train_valid = train.merge(valid);
        let train_valid_test = train_valid.merge(test);
        SplitGraphs {
            train,
            train_valid,
            train_valid_test,
        }
    }

    pub fn is_nested(&self) -> bool {
        self.train.is_subgraph_of(&self.train_valid)
            && self.train_valid.is_subgraph_of(&self.train_valid_test)
    }

    pub fn complete(&self) -> &KnowledgeGraph {
        &self.train_valid_test
    }
}
