//! Best-effort HTML to plain text.

const BLOCK_TAGS: &[&str] = &[
    "p",
    "div",
    "br",
    "li",
    "tr",
    "ul",
    "ol",
    "table",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "pre",
    "blockquote",
    "hr",
    "section",
    "article",
    "header",
    "footer",
    "dd",
    "dt",
];

const SKIP_CONTENT_TAGS: &[&str] = &["script", "style", "head", "title"];

/// Removes markup from `html` and returns readable text.
///
/// Block-level elements become line breaks, entities are decoded once,
/// horizontal whitespace is collapsed, more than one blank line is collapsed
/// to a single blank line and the result is trimmed. Malformed markup never
/// fails: a `<` that does not open a tag is kept as text.
pub fn strip_html(html: &str) -> String {
    let mut text = String::with_capacity(html.len());
    let mut rest = html;
    while let Some(pos) = rest.find('<') {
        text.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        match parse_tag(tail) {
            Some(tag) => {
                if tag.is_block {
                    text.push('\n');
                }
                rest = &tail[tag.len..];
                if let Some(name) = tag.skip_until {
                    rest = skip_element_body(rest, name);
                }
            }
            None => {
                text.push('<');
                rest = &tail[1..];
            }
        }
    }
    text.push_str(rest);
    normalize_whitespace(&html_escape::decode_html_entities(&text))
}

struct Tag {
    len: usize,
    is_block: bool,
    skip_until: Option<&'static str>,
}

fn parse_tag(s: &str) -> Option<Tag> {
    debug_assert!(s.starts_with('<'));
    if let Some(body) = s.strip_prefix("<!--") {
        let len = body.find("-->").map(|i| 4 + i + 3).unwrap_or(s.len());
        return Some(Tag {
            len,
            is_block: false,
            skip_until: None,
        });
    }
    let after = &s[1..];
    let first = after.chars().next()?;
    let closing = first == '/';
    if !(first.is_ascii_alphabetic() || closing || first == '!' || first == '?') {
        return None;
    }
    let end = find_tag_end(s)?;
    let inner = &s[1..end];
    let name: String = inner
        .trim_start_matches(['/', '!', '?'])
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    let is_block = BLOCK_TAGS.contains(&name.as_str());
    let self_closing = inner.ends_with('/');
    let skip_until = if !closing && !self_closing {
        SKIP_CONTENT_TAGS.iter().copied().find(|t| *t == name)
    } else {
        None
    };
    Some(Tag {
        len: end + 1,
        is_block,
        skip_until,
    })
}

/// Index of the `>` closing the tag starting at `s[0]`, honouring quoted
/// attribute values.
fn find_tag_end(s: &str) -> Option<usize> {
    let mut quote: Option<char> = None;
    for (i, c) in s.char_indices().skip(1) {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(c),
            (None, '>') => return Some(i),
            (None, '<') => return None,
            _ => {}
        }
    }
    None
}

fn skip_element_body<'a>(s: &'a str, name: &str) -> &'a str {
    let lower = s.to_ascii_lowercase();
    let needle = format!("</{name}");
    match lower.find(&needle) {
        Some(i) => match s[i..].find('>') {
            Some(j) => &s[i + j + 1..],
            None => "",
        },
        None => "",
    }
}

fn normalize_whitespace(s: &str) -> String {
    let s = s.replace("\r\n", "\n").replace(['\r', '\u{a0}'], " ");
    let mut out = String::with_capacity(s.len());
    let mut newlines = 0usize;
    for line in s.split('\n') {
        let collapsed = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            newlines += 1;
            continue;
        }
        if !out.is_empty() {
            out.push_str(if newlines >= 2 { "\n\n" } else { "\n" });
        }
        out.push_str(&collapsed);
        newlines = 1;
    }
    out
}
