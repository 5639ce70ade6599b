//! Documents as rooted labeled trees.
//!
//! A parsed document is a tree of *complex* nodes (elements and attributes)
//! and *atomic* nodes (character data). Attributes are complex children of
//! their element, each holding exactly one atomic child with the value.
//! Node identifiers are dense and assigned in pre-order, so every subtree
//! occupies a contiguous id range.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Reusable visited set for textual content computation.
#[derive(Debug, Default)]
pub struct TextScratch {
    marks: Vec<u32>,
    stamp: u32,
}

impl TextScratch {
    pub fn new(doc: &Document) -> Self {
        TextScratch {
            marks: vec![0; doc.len()],
            stamp: 0,
        }
    }

    fn reset(&mut self, len: usize) {
        if self.marks.len() != len || self.stamp == u32::MAX {
            self.marks = vec![0; len];
            self.stamp = 0;
        }
        self.stamp += 1;
    }

    /// Marks `n`; false if it was already marked in this round.
    fn visit(&mut self, n: NodeId) -> bool {
        std::mem::replace(&mut self.marks[n.0], self.stamp) != self.stamp
    }
}

/// Index of a node inside one [`Document`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Declared type of an attribute, as far as the data model cares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AttrType {
    #[default]
    Cdata,
    Id,
    IdRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Element,
    Attribute(AttrType),
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlNode {
    pub kind: NodeKind,
    /// Label for complex nodes, atom for text nodes.
    pub value: String,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl XmlNode {
    pub fn is_complex(&self) -> bool {
        !matches!(self.kind, NodeKind::Text)
    }

    pub fn is_attribute(&self) -> bool {
        matches!(self.kind, NodeKind::Attribute(_))
    }

    pub fn is_element(&self) -> bool {
        matches!(self.kind, NodeKind::Element)
    }

    pub fn label(&self) -> Option<&str> {
        self.is_complex().then_some(self.value.as_str())
    }

    pub fn atom(&self) -> Option<&str> {
        (!self.is_complex()).then_some(self.value.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum XmlError {
    #[error("malformed XML at {line}:{column}: {message}")]
    Syntax {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("duplicate ID value {value:?}")]
    DuplicateId { value: String },
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Old-to-new node ids of a projection; `None` for dropped nodes.
pub type IdMap = Vec<Option<NodeId>>;

/// Source of attribute type declarations used while resolving ID/IDREF links.
pub trait AttributeTypes {
    fn attribute_type(&self, element: &str, attribute: &str) -> AttrType;
}

/// Treats every attribute as CDATA.
#[derive(Debug, Clone, Copy, Default)]
pub struct Untyped;

impl AttributeTypes for Untyped {
    fn attribute_type(&self, _element: &str, _attribute: &str) -> AttrType {
        AttrType::Cdata
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    nodes: Vec<XmlNode>,
    subtree_end: Vec<usize>,
    depth: Vec<usize>,
    id_index: BTreeMap<String, NodeId>,
    idref_links: BTreeMap<NodeId, NodeId>,
}

/// Parses a document without attribute type information.
pub fn parse_document(text: &str) -> Result<Document, XmlError> {
    parse_document_typed(text, &Untyped)
}

/// Parses a document, typing attributes through `types` so that ID and IDREF
/// attributes are indexed and linked.
pub fn parse_document_typed(text: &str, types: &dyn AttributeTypes) -> Result<Document, XmlError> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let parsed = roxmltree::Document::parse_with_options(text, opts).map_err(|e| {
        let pos = e.pos();
        XmlError::Syntax {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let mut builder = DocumentBuilder::new();
    copy_element(parsed.root_element(), &mut builder, types);
    builder.finish()
}

fn copy_element(el: roxmltree::Node<'_, '_>, b: &mut DocumentBuilder, types: &dyn AttributeTypes) {
    let name = el.tag_name().name();
    b.open(name);
    for attr in el.attributes() {
        let ty = types.attribute_type(name, attr.name());
        b.attribute(attr.name(), attr.value(), ty);
    }
    let mut pending = String::new();
    for child in el.children() {
        if child.is_element() {
            b.text(pending.trim());
            pending.clear();
            copy_element(child, b, types);
        } else if child.is_text() {
            pending.push_str(child.text().unwrap_or_default());
        }
    }
    b.text(pending.trim());
    b.close();
}

/// Incremental construction of a [`Document`] in document order.
#[derive(Debug, Default)]
pub struct DocumentBuilder {
    nodes: Vec<XmlNode>,
    stack: Vec<NodeId>,
}

impl DocumentBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, kind: NodeKind, value: &str) -> NodeId {
        let id = NodeId(self.nodes.len());
        let parent = self.stack.last().copied();
        if let Some(p) = parent {
            self.nodes[p.0].children.push(id);
        }
        self.nodes.push(XmlNode {
            kind,
            value: value.to_owned(),
            parent,
            children: Vec::new(),
        });
        id
    }

    /// Opens an element. The first element opened becomes the root.
    pub fn open(&mut self, label: &str) -> NodeId {
        let id = self.push(NodeKind::Element, label);
        self.stack.push(id);
        id
    }

    pub fn close(&mut self) {
        self.stack.pop();
    }

    pub fn attribute(&mut self, name: &str, value: &str, ty: AttrType) -> NodeId {
        let id = self.push(NodeKind::Attribute(ty), name);
        self.stack.push(id);
        self.push(NodeKind::Text, value);
        self.stack.pop();
        id
    }

    /// Appends character data; empty strings are ignored.
    pub fn text(&mut self, atom: &str) {
        if !atom.is_empty() {
            self.push(NodeKind::Text, atom);
        }
    }

    pub fn finish(self) -> Result<Document, XmlError> {
        if self.nodes.is_empty() {
            return Err(XmlError::Contract("document has no root element".into()));
        }
        if self.nodes.iter().skip(1).any(|n| n.parent.is_none()) {
            return Err(XmlError::Contract("more than one root element".into()));
        }
        Document::from_nodes(self.nodes, true)
    }
}

impl Document {
    fn from_nodes(nodes: Vec<XmlNode>, strict_ids: bool) -> Result<Self, XmlError> {
        let n = nodes.len();
        let mut subtree_end = vec![0; n];
        let mut depth = vec![0; n];
        for i in 0..n {
            if let Some(p) = nodes[i].parent {
                depth[i] = depth[p.0] + 1;
            }
        }
        for i in (0..n).rev() {
            subtree_end[i] = nodes[i]
                .children
                .last()
                .map_or(i + 1, |c| subtree_end[c.0]);
        }
        let mut doc = Document {
            nodes,
            subtree_end,
            depth,
            id_index: BTreeMap::new(),
            idref_links: BTreeMap::new(),
        };
        doc.resolve_ids(strict_ids)?;
        Ok(doc)
    }

    fn resolve_ids(&mut self, strict: bool) -> Result<(), XmlError> {
        for (i, node) in self.nodes.iter().enumerate() {
            if node.kind == NodeKind::Attribute(AttrType::Id) {
                let value = self.attribute_value(NodeId(i)).to_owned();
                let owner = node.parent.expect("attribute has an owner");
                if self.id_index.insert(value.clone(), owner).is_some() && strict {
                    return Err(XmlError::DuplicateId { value });
                }
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.kind == NodeKind::Attribute(AttrType::IdRef) {
                if let Some(&target) = self.id_index.get(self.attribute_value(NodeId(i))) {
                    self.idref_links.insert(NodeId(i), target);
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, n: NodeId) -> &XmlNode {
        &self.nodes[n.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &XmlNode)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.nodes[n.0].parent
    }

    pub fn children(&self, n: NodeId) -> &[NodeId] {
        &self.nodes[n.0].children
    }

    pub fn label(&self, n: NodeId) -> Option<&str> {
        self.nodes[n.0].label()
    }

    pub fn depth(&self, n: NodeId) -> usize {
        self.depth[n.0]
    }

    /// Ids of the strict descendants of `n`, in document order.
    pub fn descendant_range(&self, n: NodeId) -> impl Iterator<Item = NodeId> {
        (n.0 + 1..self.subtree_end[n.0]).map(NodeId)
    }

    pub fn is_ancestor(&self, a: NodeId, n: NodeId) -> bool {
        a.0 < n.0 && n.0 < self.subtree_end[a.0]
    }

    pub fn id_index(&self) -> &BTreeMap<String, NodeId> {
        &self.id_index
    }

    pub fn idref_links(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.idref_links
    }

    /// Value stored under an attribute node (empty if it has no atom).
    pub fn attribute_value(&self, attr: NodeId) -> &str {
        self.nodes[attr.0]
            .children
            .first()
            .map_or("", |c| self.nodes[c.0].value.as_str())
    }

    /// Attribute nodes of an element, in document order.
    pub fn attributes(&self, element: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.children(element)
            .iter()
            .copied()
            .filter(|c| self.nodes[c.0].is_attribute())
    }

    /// Labels from the root to `n`, inclusive. Atomic nodes contribute nothing.
    pub fn path_of(&self, n: NodeId) -> Vec<&str> {
        let mut path = Vec::with_capacity(self.depth[n.0] + 1);
        let mut cur = Some(n);
        while let Some(c) = cur {
            if let Some(l) = self.nodes[c.0].label() {
                path.push(l);
            }
            cur = self.nodes[c.0].parent;
        }
        path.reverse();
        path
    }

    pub fn ancestors(&self, n: NodeId) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut cur = self.nodes[n.0].parent;
        while let Some(c) = cur {
            out.insert(c);
            cur = self.nodes[c.0].parent;
        }
        out
    }

    pub fn descendants(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.descendant_range(n).collect()
    }

    /// Textual content: the atom of an atomic node, otherwise the
    /// space-separated concatenation of the content of children and
    /// indirect children (IDREF targets), each node visited at most once.
    ///
    /// When an IDREF is followed, the target's own ID attribute is skipped;
    /// its value is already present as the IDREF value.
    pub fn textual_content(&self, n: NodeId) -> String {
        self.textual_content_with(n, &mut TextScratch::new(self))
    }

    /// Same as [`textual_content`](Self::textual_content), reusing `scratch`
    /// across calls on one document.
    pub fn textual_content_with(&self, n: NodeId, scratch: &mut TextScratch) -> String {
        scratch.reset(self.nodes.len());
        let mut parts = Vec::new();
        self.collect_text(n, scratch, &mut parts);
        parts.join(" ")
    }

    fn collect_text<'a>(&'a self, n: NodeId, seen: &mut TextScratch, parts: &mut Vec<&'a str>) {
        if !seen.visit(n) {
            return;
        }
        let node = &self.nodes[n.0];
        if !node.is_complex() {
            if !node.value.is_empty() {
                parts.push(&node.value);
            }
            return;
        }
        for &c in &node.children {
            self.collect_text(c, seen, parts);
        }
        if let Some(&target) = self.idref_links.get(&n) {
            for a in self.attributes(target) {
                if self.nodes[a.0].kind == NodeKind::Attribute(AttrType::Id) {
                    seen.visit(a);
                }
            }
            self.collect_text(target, seen, parts);
        }
    }

    /// Restricts the document to `keep`, which must be closed under
    /// ancestors. Returns `None` for an empty set.
    pub fn project(&self, keep: &BTreeSet<NodeId>) -> Result<Option<Document>, XmlError> {
        Ok(self.project_with_map(keep)?.map(|(doc, _)| doc))
    }

    /// Like [`project`](Self::project), also returning the old-to-new id map.
    pub fn project_with_map(
        &self,
        keep: &BTreeSet<NodeId>,
    ) -> Result<Option<(Document, IdMap)>, XmlError> {
        if keep.is_empty() {
            return Ok(None);
        }
        for &k in keep {
            if k.0 >= self.nodes.len() {
                return Err(XmlError::Contract(format!("node {k} is not in the document")));
            }
            match self.nodes[k.0].parent {
                Some(p) if !keep.contains(&p) => {
                    return Err(XmlError::Contract(format!(
                        "kept node {k} has parent {p} outside the kept set"
                    )))
                }
                _ => {}
            }
        }
        let mut map = vec![None; self.nodes.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old.0] = Some(NodeId(new));
        }
        let nodes = keep
            .iter()
            .map(|&old| {
                let src = &self.nodes[old.0];
                XmlNode {
                    kind: src.kind,
                    value: src.value.clone(),
                    parent: src.parent.and_then(|p| map[p.0]),
                    children: src.children.iter().filter_map(|c| map[c.0]).collect(),
                }
            })
            .collect();
        let doc = Document::from_nodes(nodes, false)?;
        Ok(Some((doc, map)))
    }

    /// Copies the subtree of `n` into `b`. `after_children` runs just before
    /// each copied element is closed, allowing extra children to be appended.
    pub fn copy_into(
        &self,
        n: NodeId,
        b: &mut DocumentBuilder,
        after_children: &mut dyn FnMut(NodeId, &mut DocumentBuilder),
    ) {
        let node = &self.nodes[n.0];
        match node.kind {
            NodeKind::Text => b.text(&node.value),
            NodeKind::Attribute(ty) => {
                b.attribute(&node.value, self.attribute_value(n), ty);
            }
            NodeKind::Element => {
                b.open(&node.value);
                for &c in &node.children {
                    self.copy_into(c, b, after_children);
                }
                after_children(n, b);
                b.close();
            }
        }
    }

    /// Distinct element and attribute names occurring in the document.
    pub fn label_set(&self) -> BTreeSet<&str> {
        self.nodes.iter().filter_map(XmlNode::label).collect()
    }

    pub fn complex_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_complex()).count()
    }
}

/// Emits the document as indented XML. Attribute nodes become attributes;
/// elements without children are self-closing.
pub fn serialize_document(doc: &Document) -> String {
    let mut out = String::new();
    write_element(doc, doc.root(), 0, &mut out);
    out
}

fn write_element(doc: &Document, n: NodeId, indent: usize, out: &mut String) {
    let node = doc.node(n);
    let pad = "  ".repeat(indent);
    out.push_str(&pad);
    out.push('<');
    out.push_str(&node.value);
    for a in doc.attributes(n) {
        out.push(' ');
        out.push_str(&doc.node(a).value);
        out.push_str("=\"");
        escape_into(doc.attribute_value(a), true, out);
        out.push('"');
    }
    let content: Vec<NodeId> = node
        .children
        .iter()
        .copied()
        .filter(|c| !doc.node(*c).is_attribute())
        .collect();
    if content.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push('>');
    let has_text = content.iter().any(|c| !doc.node(*c).is_complex());
    if has_text {
        // Inline so that no layout whitespace leaks into character data.
        for (i, &c) in content.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if doc.node(c).is_complex() {
                let mut inner = String::new();
                write_element(doc, c, 0, &mut inner);
                out.push_str(inner.trim_end());
            } else {
                escape_into(&doc.node(c).value, false, out);
            }
        }
    } else {
        out.push('\n');
        for &c in &content {
            write_element(doc, c, indent + 1, out);
        }
        out.push_str(&pad);
    }
    out.push_str("</");
    out.push_str(&node.value);
    out.push_str(">\n");
}

fn escape_into(s: &str, attribute: bool, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
}
