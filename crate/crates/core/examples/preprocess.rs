//! Newsgroup-style cleaning and Reuters-style class filtering on small
//! in-memory corpora.

use sadcluster::corpus::{
    clean_newsgroup_text, filter_min_sentences, preprocess_newsgroup_style, preprocess_reuters_style, Corpus,
    Document,
};

fn main() -> sadcluster::Result<()> {
    let raw = "From: someone@example.com\nSubject: Re: engines\n\n> quoted reply text\nThe new engine \
               runs quietly. Mileage improved a lot!\n--\nsignature";
    println!("raw:\n{raw}\n");
    println!("cleaned:\n{}\n", clean_newsgroup_text(raw));

    let news = Corpus::new(
        vec![
            Document::new("n0", raw, Some(0)),
            Document::new("n1", "Too short.", Some(1)),
            Document::new(
                "n2",
                "Orbit insertion went as planned. The probe sent its first images back yesterday.",
                Some(1),
            ),
        ],
        Some(vec!["autos".into(), "space".into()]),
        None,
    )?;
    let cleaned = preprocess_newsgroup_style(&news, 5)?;
    println!(
        "newsgroup profile kept {:?}",
        cleaned.documents.iter().map(|d| d.id.as_str()).collect::<Vec<_>>()
    );

    // Multi-label documents are dropped; the two most frequent classes remain.
    let wire = Corpus::new(
        vec![
            Document::new("r0", "Grain prices rose. Exports slowed.", Some(0)),
            Document::new("r1", "Crude output was cut.", Some(1)),
            Document::with_labels("r2", "Grain and crude both moved.", vec![0, 1]),
            Document::new("r3", "Wheat shipments resumed.", Some(0)),
            Document::new("r4", "Gold hit a record.", Some(2)),
            Document::new("r5", "Refinery margins fell. Crude stocks grew.", Some(1)),
        ],
        Some(vec!["grain".into(), "crude".into(), "gold".into()]),
        None,
    )?;
    let top = preprocess_reuters_style(&wire, 2)?;
    println!(
        "reuters profile kept {:?} with classes {:?}",
        top.documents.iter().map(|d| (d.id.as_str(), d.label)).collect::<Vec<_>>(),
        top.label_names
    );

    let multi = filter_min_sentences(&top, 2)?;
    println!(
        "documents with at least 2 sentences: {:?}",
        multi.documents.iter().map(|d| d.id.as_str()).collect::<Vec<_>>()
    );
    Ok(())
}
