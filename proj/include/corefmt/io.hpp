#pragma once

// Text file formats shared by the corpus pipeline and the CLI.
//
//   paired text      one tokenized sentence per line; a blank line ends a
//                    document. Source and target files must agree line by line.
//   cluster sidecar  one JSON record per line: a list of clusters, each a list
//                    of [start, end] pairs, 1-based and inclusive.
//   window file      one separator-joined sequence per line.
//   window set       directory with windows.src, windows.tgt (window files),
//                    windows.clusters (sidecar over the joined source) and
//                    windows.ids ("<doc>:<index>" per line).
//   merges file      "#version: 0.2" header, then one "left right" merge per line.

#include <filesystem>
#include <string>
#include <vector>

#include "corefmt/corpus.hpp"
#include "corefmt/subword.hpp"

namespace corefmt {

Tokens split_whitespace(const std::string& line);
std::string join_tokens(const Tokens& tokens);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

// Throws CorpusError naming `line_number` when the record is malformed.
CorefClusterSet parse_cluster_record(const std::string& line, std::size_t line_number = 0);
std::string format_cluster_record(const CorefClusterSet& clusters);

std::vector<CorefClusterSet> read_cluster_sidecar(const std::filesystem::path& path);
void write_cluster_sidecar(const std::filesystem::path& path, const std::vector<CorefClusterSet>& records);

// Documents from paired text files. When `clusters` is non-empty it must hold
// one record per document, indexed into the document's concatenated words.
std::vector<Document> read_paired_documents(const std::filesystem::path& src,
                                            const std::filesystem::path& tgt,
                                            const std::vector<CorefClusterSet>& clusters = {});

// Writes the paired text files and, when `clusters` is non-empty, the sidecar.
void write_paired_documents(const std::vector<Document>& docs, const std::filesystem::path& src,
                            const std::filesystem::path& tgt, const std::filesystem::path& clusters = {});

void write_window_set(const std::filesystem::path& dir, const std::vector<DocumentWindow>& windows);
std::vector<DocumentWindow> read_window_set(const std::filesystem::path& dir);

void write_merges(const std::filesystem::path& path, const BpeModel& model);
BpeModel read_merges(const std::filesystem::path& path);

}  // namespace corefmt
