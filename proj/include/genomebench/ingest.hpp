#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "genomebench/common.hpp"
#include "json.hpp"

namespace genomebench::ingest {

struct RawMessage {
    std::string message_id;
    std::optional<std::string> in_reply_to;
    std::vector<std::string> references;
    std::string subject;
    std::string sender;  // raw From: value
    std::int64_t date = 0;  // UTC seconds
    std::string body;

    bool has_link_headers() const { return in_reply_to.has_value() || !references.empty(); }
};

struct EmailThread {
    std::string thread_id;
    std::string subject_normalized;
    std::vector<RawMessage> messages;  // date ascending
};

struct ParseReport {
    int messages_read = 0;
    int messages_dropped = 0;
    int threads_formed = 0;
    long undecodable_bytes = 0;  // bytes replaced by U+FFFD during decoding
};

struct ParseResult {
    std::vector<EmailThread> threads;
    ParseReport report;
};

// Splits an mbox stream on "From " delimiter lines, parses RFC 5322-style
// headers, decodes quoted-printable/base64 transport encodings, and groups
// messages into threads: References/In-Reply-To chains first, normalized
// subject only among messages with no linkage headers. Messages with no
// parseable headers or without a usable Date are dropped and counted.
ParseResult parse_mbox(std::istream& in);
ParseResult parse_mbox_file(const std::filesystem::path& path);

// "Re:"/"Fwd:" prefixes and case stripped, whitespace collapsed.
std::string normalize_subject(std::string_view subject);

// RFC 2822-style date to UTC seconds; nullopt when unparseable.
std::optional<std::int64_t> parse_date(std::string_view value);

struct AnonymizationMap {
    // identity -> alias, in order of first appearance within the thread
    std::vector<std::pair<std::string, std::string>> alias_by_identity;

    std::optional<std::string> alias_for(std::string_view identity) const;
};

// Replaces sender identities (addresses and From display-name tokens) with
// PersonA, PersonB, ... aliases in sender fields and message bodies.
// Idempotent on its own output.
std::pair<EmailThread, AnonymizationMap> anonymize_thread(const EmailThread& thread);

std::string alias_for_index(std::size_t index);  // 0 -> "PersonA", 26 -> "PersonAA"

nlohmann::json thread_to_json(const EmailThread& thread);
EmailThread thread_from_json(const nlohmann::json& j);

void write_threads(const std::filesystem::path& path, const std::vector<EmailThread>& threads);
std::vector<EmailThread> read_threads(const std::filesystem::path& path);

// Plain-text rendering of a thread for prompting: sender/date header line
// plus body per message.
std::string render_thread(const EmailThread& thread);

}  // namespace genomebench::ingest
