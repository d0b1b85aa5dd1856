#include "genomebench/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <unordered_map>

namespace genomebench::ingest {

namespace {

constexpr std::string_view kReplacementChar = "\xEF\xBF\xBD";  // U+FFFD

// ---- header block ----

struct HeaderBlock {
    // lowercased name -> unfolded value, first occurrence wins
    std::unordered_map<std::string, std::string> fields;
    int parsed_lines = 0;
};

HeaderBlock parse_headers(std::span<const std::string> lines) {
    HeaderBlock block;
    std::string currentName;
    for (const std::string& line : lines) {
        if (!line.empty() && (line[0] == ' ' || line[0] == '\t')) {
            if (!currentName.empty()) {
                block.fields[currentName] += " " + trim(line);
                ++block.parsed_lines;
            }
            continue;
        }
        const std::size_t colon = line.find(':');
        if (colon == std::string::npos || colon == 0) {
            currentName.clear();
            continue;
        }
        currentName = to_lower(trim(line.substr(0, colon)));
        const std::string value = trim(line.substr(colon + 1));
        if (block.fields.find(currentName) == block.fields.end()) {
            block.fields[currentName] = value;
        }
        ++block.parsed_lines;
    }
    return block;
}

std::string header_or_empty(const HeaderBlock& block, const char* name) {
    const auto it = block.fields.find(name);
    return it == block.fields.end() ? std::string() : it->second;
}

// Message-IDs and References hold <...> tokens.
std::vector<std::string> angle_tokens(std::string_view value) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = value.find('<', pos);
        if (open == std::string_view::npos) break;
        const std::size_t close = value.find('>', open + 1);
        if (close == std::string_view::npos) break;
        out.emplace_back(value.substr(open + 1, close - open - 1));
        pos = close + 1;
    }
    if (out.empty()) {
        const std::string bare = trim(value);
        if (!bare.empty()) out.push_back(bare);
    }
    return out;
}

// ---- date parsing ----

const std::unordered_map<std::string, int> kMonths = {
    {"jan", 1}, {"feb", 2}, {"mar", 3}, {"apr", 4},  {"may", 5},  {"jun", 6},
    {"jul", 7}, {"aug", 8}, {"sep", 9}, {"oct", 10}, {"nov", 11}, {"dec", 12}};

const std::unordered_map<std::string, int> kZoneMinutes = {
    {"gmt", 0},    {"utc", 0},    {"ut", 0},     {"z", 0},
    {"est", -300}, {"edt", -240}, {"cst", -360}, {"cdt", -300},
    {"mst", -420}, {"mdt", -360}, {"pst", -480}, {"pdt", -420}};

long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

// ---- transport decoding ----

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::string decode_quoted_printable(std::string_view body, long& replaced) {
    std::string out;
    out.reserve(body.size());
    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (c != '=') {
            out.push_back(c);
            continue;
        }
        if (i + 1 < body.size() && body[i + 1] == '\n') {  // soft break
            ++i;
            continue;
        }
        if (i + 2 < body.size() && body[i + 1] == '\r' && body[i + 2] == '\n') {
            i += 2;
            continue;
        }
        const int hi = i + 1 < body.size() ? hex_digit(body[i + 1]) : -1;
        const int lo = i + 2 < body.size() ? hex_digit(body[i + 2]) : -1;
        if (hi >= 0 && lo >= 0) {
            out.push_back(static_cast<char>(hi * 16 + lo));
            i += 2;
        } else {
            out.append(kReplacementChar);
            ++replaced;
        }
    }
    return out;
}

int base64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::string decode_base64(std::string_view body, long& replaced) {
    std::string out;
    int buffer = 0;
    int bits = 0;
    for (char c : body) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == '=') continue;
        const int v = base64_value(c);
        if (v < 0) {
            out.append(kReplacementChar);
            ++replaced;
            continue;
        }
        buffer = (buffer << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((buffer >> bits) & 0xff));
        }
    }
    return out;
}

// Replaces invalid UTF-8 byte runs with U+FFFD, counting replacements.
std::string sanitize_utf8(std::string_view text, long& replaced) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        if (c < 0x80) {
            len = 1;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
        }
        bool valid = len > 0 && i + len <= text.size();
        for (std::size_t k = 1; valid && k < len; ++k) {
            valid = (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
        }
        if (valid) {
            out.append(text.substr(i, len));
            i += len;
        } else {
            out.append(kReplacementChar);
            ++replaced;
            ++i;
        }
    }
    return out;
}

// ---- threading ----

struct Dsu {
    std::unordered_map<std::string, std::string> parent;

    const std::string& find(const std::string& key) {
        auto it = parent.find(key);
        if (it == parent.end()) {
            it = parent.emplace(key, key).first;
            return it->first;
        }
        if (it->second == key) return it->first;
        const std::string root = find(it->second);
        parent[key] = root;
        return parent.find(key)->second;
    }

    void unite(const std::string& a, const std::string& b) {
        const std::string ra = find(a);
        const std::string rb = find(b);
        if (ra != rb) parent[ra] = rb;
    }
};

const std::regex kEmailPattern("[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\\.[A-Za-z]{2,}");

// Display name from a From: value like `Jane Doe <jane@lab.org>` or
// `jane@lab.org (Jane Doe)`.
std::string display_name(std::string_view sender) {
    const std::size_t angle = sender.find('<');
    if (angle != std::string_view::npos) {
        std::string name = trim(sender.substr(0, angle));
        if (name.size() >= 2 && name.front() == '"' && name.back() == '"') {
            name = name.substr(1, name.size() - 2);
        }
        return name;
    }
    const std::size_t open = sender.find('(');
    const std::size_t close = sender.rfind(')');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        return trim(sender.substr(open + 1, close - open - 1));
    }
    return std::string();
}

std::string sender_address(const std::string& sender) {
    std::smatch match;
    if (std::regex_search(sender, match, kEmailPattern)) return to_lower(match[0].str());
    return std::string();
}

void replace_all_ci(std::string& text, const std::string& needle, const std::string& replacement,
                    bool whole_word = false) {
    if (needle.empty()) return;
    const std::string lowered = to_lower(text);
    const std::string target = to_lower(needle);
    const auto isWordChar = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) != 0;
    };
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (true) {
        const std::size_t hit = lowered.find(target, pos);
        if (hit == std::string::npos) {
            out.append(text.substr(pos));
            break;
        }
        const bool boundedLeft = hit == 0 || !isWordChar(lowered[hit - 1]);
        const std::size_t end = hit + target.size();
        const bool boundedRight = end >= lowered.size() || !isWordChar(lowered[end]);
        if (whole_word && !(boundedLeft && boundedRight)) {
            out.append(text.substr(pos, end - pos));
            pos = end;
            continue;
        }
        out.append(text.substr(pos, hit - pos));
        out.append(replacement);
        pos = end;
    }
    text = std::move(out);
}

}  // namespace

std::string normalize_subject(std::string_view subject) {
    std::string s = trim(subject);
    bool stripped = true;
    while (stripped) {
        stripped = false;
        const std::string lowered = to_lower(s);
        for (std::string_view prefix : {"re:", "fwd:", "fw:"}) {
            if (starts_with(lowered, prefix)) {
                s = trim(s.substr(prefix.size()));
                stripped = true;
                break;
            }
        }
    }
    std::string collapsed;
    bool lastSpace = false;
    for (char c : to_lower(s)) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (space && lastSpace) continue;
        collapsed.push_back(space ? ' ' : c);
        lastSpace = space;
    }
    return trim(collapsed);
}

std::optional<std::int64_t> parse_date(std::string_view value) {
    // Accepts [Day,] D Mon YYYY HH:MM[:SS] zone
    std::string s(value);
    const std::size_t comma = s.find(',');
    if (comma != std::string::npos) s = s.substr(comma + 1);

    std::istringstream in(s);
    std::string dayToken, monthToken, yearToken, timeToken, zoneToken;
    if (!(in >> dayToken >> monthToken >> yearToken >> timeToken)) return std::nullopt;
    in >> zoneToken;

    int day = 0;
    int year = 0;
    try {
        day = std::stoi(dayToken);
        year = std::stoi(yearToken);
    } catch (...) {
        return std::nullopt;
    }
    if (year < 100) year += year < 70 ? 2000 : 1900;

    const auto monthIt = kMonths.find(to_lower(monthToken).substr(0, 3));
    if (monthIt == kMonths.end()) return std::nullopt;
    const int month = monthIt->second;
    if (day < 1 || day > 31) return std::nullopt;

    int hh = 0, mm = 0, ss = 0;
    if (std::sscanf(timeToken.c_str(), "%d:%d:%d", &hh, &mm, &ss) < 2) return std::nullopt;
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60) return std::nullopt;

    int offsetMinutes = 0;
    if (!zoneToken.empty()) {
        if (zoneToken[0] == '+' || zoneToken[0] == '-') {
            if (zoneToken.size() != 5) return std::nullopt;
            int hours = 0, minutes = 0;
            if (std::sscanf(zoneToken.c_str() + 1, "%2d%2d", &hours, &minutes) != 2) {
                return std::nullopt;
            }
            offsetMinutes = hours * 60 + minutes;
            if (zoneToken[0] == '-') offsetMinutes = -offsetMinutes;
        } else {
            const auto zoneIt = kZoneMinutes.find(to_lower(zoneToken));
            if (zoneIt == kZoneMinutes.end()) return std::nullopt;
            offsetMinutes = zoneIt->second;
        }
    }

    const long days = days_from_civil(year, month, day);
    return static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss -
           static_cast<std::int64_t>(offsetMinutes) * 60;
}

ParseResult parse_mbox(std::istream& in) {
    ParseResult result;

    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::vector<std::string> lines = split_lines(content);

    // Split into raw message blocks on "From " delimiter lines.
    std::vector<std::vector<std::string>> blocks;
    for (const std::string& line : lines) {
        if (starts_with(line, "From ")) {
            blocks.emplace_back();
            continue;
        }
        if (blocks.empty()) continue;  // leading garbage before the first delimiter
        blocks.back().push_back(line);
    }

    std::vector<RawMessage> messages;
    std::unordered_map<std::string, std::size_t> byId;

    for (const std::vector<std::string>& block : blocks) {
        ++result.report.messages_read;

        // Header block runs to the first empty line.
        std::size_t bodyStart = block.size();
        for (std::size_t i = 0; i < block.size(); ++i) {
            if (block[i].empty()) {
                bodyStart = i + 1;
                break;
            }
        }
        const HeaderBlock headers =
            parse_headers(std::span(block.data(), std::min(bodyStart, block.size())));
        if (headers.parsed_lines == 0) {
            ++result.report.messages_dropped;
            continue;
        }

        const std::optional<std::int64_t> date = parse_date(header_or_empty(headers, "date"));
        if (!date) {
            ++result.report.messages_dropped;
            continue;
        }

        RawMessage message;
        message.date = *date;
        message.subject = header_or_empty(headers, "subject");
        message.sender = header_or_empty(headers, "from");

        const std::vector<std::string> ids = angle_tokens(header_or_empty(headers, "message-id"));
        if (!ids.empty()) message.message_id = ids.front();

        const std::vector<std::string> irt = angle_tokens(header_or_empty(headers, "in-reply-to"));
        if (!irt.empty()) message.in_reply_to = irt.front();
        message.references = angle_tokens(header_or_empty(headers, "references"));

        // Body: unescape ">From " quoting, then decode the transport encoding.
        std::string body;
        for (std::size_t i = bodyStart; i < block.size(); ++i) {
            std::string_view line = block[i];
            std::size_t gt = 0;
            while (gt < line.size() && line[gt] == '>') ++gt;
            if (gt > 0 && starts_with(line.substr(gt), "From ")) line = line.substr(1);
            body.append(line);
            body.push_back('\n');
        }
        if (!body.empty()) body.pop_back();

        const std::string encoding =
            to_lower(trim(header_or_empty(headers, "content-transfer-encoding")));
        if (encoding == "quoted-printable") {
            body = decode_quoted_printable(body, result.report.undecodable_bytes);
        } else if (encoding == "base64") {
            body = decode_base64(body, result.report.undecodable_bytes);
        }
        message.body = sanitize_utf8(body, result.report.undecodable_bytes);

        if (message.message_id.empty()) {
            message.message_id =
                "synthetic-" + hex64(fnv1a64(message.sender + "\x1f" + std::to_string(message.date) +
                                             "\x1f" + message.subject + "\x1f" + message.body));
        }
        if (byId.count(message.message_id) != 0) {
            ++result.report.messages_dropped;  // duplicate id, first occurrence wins
            continue;
        }
        byId[message.message_id] = messages.size();
        messages.push_back(std::move(message));
    }

    // Header linkage wins; subject grouping only among linkage-free messages.
    // "id:" nodes let chains meet through referenced messages that are
    // missing from the archive.
    Dsu dsu;
    for (const RawMessage& message : messages) {
        dsu.unite(message.message_id, "id:" + message.message_id);
        if (message.in_reply_to) dsu.unite(message.message_id, "id:" + *message.in_reply_to);
        for (const std::string& ref : message.references) {
            dsu.unite(message.message_id, "id:" + ref);
        }
        if (!message.has_link_headers()) {
            dsu.unite(message.message_id, "subject:" + normalize_subject(message.subject));
        }
    }

    std::map<std::string, std::vector<std::size_t>> groups;  // root -> message indices, ordered
    for (std::size_t i = 0; i < messages.size(); ++i) {
        groups[dsu.find(messages[i].message_id)].push_back(i);
    }

    std::vector<EmailThread> threads;
    for (auto& [root, indices] : groups) {
        std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            return messages[a].date < messages[b].date;
        });
        EmailThread thread;
        for (std::size_t index : indices) thread.messages.push_back(messages[index]);
        thread.subject_normalized = normalize_subject(thread.messages.front().subject);

        const bool linked =
            std::any_of(thread.messages.begin(), thread.messages.end(),
                        [](const RawMessage& m) { return m.has_link_headers(); });
        if (linked) {
            thread.thread_id = "t" + hex64(fnv1a64(thread.messages.front().message_id));
        } else {
            thread.thread_id = "t" + hex64(fnv1a64(thread.subject_normalized + ":" +
                                                   std::to_string(thread.messages.front().date)));
        }
        threads.push_back(std::move(thread));
    }

    std::sort(threads.begin(), threads.end(), [](const EmailThread& a, const EmailThread& b) {
        if (a.messages.front().date != b.messages.front().date) {
            return a.messages.front().date < b.messages.front().date;
        }
        return a.thread_id < b.thread_id;
    });

    result.report.threads_formed = static_cast<int>(threads.size());
    result.threads = std::move(threads);
    return result;
}

ParseResult parse_mbox_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string());
    return parse_mbox(in);
}

std::optional<std::string> AnonymizationMap::alias_for(std::string_view identity) const {
    for (const auto& [id, alias] : alias_by_identity) {
        if (id == identity) return alias;
    }
    return std::nullopt;
}

std::string alias_for_index(std::size_t index) {
    std::string suffix;
    std::size_t n = index;
    while (true) {
        suffix.insert(suffix.begin(), static_cast<char>('A' + n % 26));
        if (n < 26) break;
        n = n / 26 - 1;
    }
    return "Person" + suffix;
}

std::pair<EmailThread, AnonymizationMap> anonymize_thread(const EmailThread& thread) {
    // Identities: senders first (in message order), then body-found addresses.
    struct Identity {
        std::string key;             // lowercased address, or display name when no address
        std::string address;         // may be empty
        std::string display;         // may be empty
        std::vector<std::string> tokens;  // display-name tokens worth masking
    };
    std::vector<Identity> identities;
    const auto known = [&](const std::string& key) {
        return std::any_of(identities.begin(), identities.end(),
                           [&](const Identity& identity) { return identity.key == key; });
    };

    for (const RawMessage& message : thread.messages) {
        const std::string address = sender_address(message.sender);
        const std::string display = display_name(message.sender);
        std::string key = !address.empty() ? address : to_lower(trim(message.sender));
        if (key.empty()) continue;
        if (known(key)) continue;
        Identity identity{key, address, display, {}};
        if (!display.empty()) {
            for (const std::string& token : word_tokens(display)) {
                if (token.size() >= 3) identity.tokens.push_back(token);
            }
        }
        identities.push_back(std::move(identity));
    }
    for (const RawMessage& message : thread.messages) {
        auto begin = std::sregex_iterator(message.body.begin(), message.body.end(), kEmailPattern);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            const std::string address = to_lower(it->str());
            if (!known(address)) identities.push_back({address, address, "", {}});
        }
    }

    AnonymizationMap map;
    for (std::size_t i = 0; i < identities.size(); ++i) {
        map.alias_by_identity.emplace_back(identities[i].key, alias_for_index(i));
    }

    EmailThread out = thread;
    for (RawMessage& message : out.messages) {
        const std::string address = sender_address(message.sender);
        const std::string key = !address.empty() ? address : to_lower(trim(message.sender));
        if (const auto alias = map.alias_for(key)) message.sender = *alias;

        for (std::size_t i = 0; i < identities.size(); ++i) {
            const Identity& identity = identities[i];
            const std::string& alias = map.alias_by_identity[i].second;
            if (!identity.address.empty()) replace_all_ci(message.body, identity.address, alias);
            if (!identity.display.empty()) {
                replace_all_ci(message.body, identity.display, alias, /*whole_word=*/true);
            }
            for (const std::string& token : identity.tokens) {
                replace_all_ci(message.body, token, alias, /*whole_word=*/true);
            }
        }
    }
    return {std::move(out), std::move(map)};
}

nlohmann::json thread_to_json(const EmailThread& thread) {
    nlohmann::json messages = nlohmann::json::array();
    for (const RawMessage& message : thread.messages) {
        messages.push_back({{"id", message.message_id},
                            {"sender", message.sender},
                            {"date", message.date},
                            {"body", message.body}});
    }
    return {{"thread_id", thread.thread_id},
            {"subject", thread.subject_normalized},
            {"messages", messages}};
}

EmailThread thread_from_json(const nlohmann::json& j) {
    EmailThread thread;
    thread.thread_id = j.at("thread_id").get<std::string>();
    thread.subject_normalized = j.at("subject").get<std::string>();
    for (const nlohmann::json& m : j.at("messages")) {
        RawMessage message;
        message.message_id = m.at("id").get<std::string>();
        message.sender = m.at("sender").get<std::string>();
        message.date = m.at("date").get<std::int64_t>();
        message.body = m.at("body").get<std::string>();
        message.subject = thread.subject_normalized;
        thread.messages.push_back(std::move(message));
    }
    return thread;
}

void write_threads(const std::filesystem::path& path, const std::vector<EmailThread>& threads) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    for (const EmailThread& thread : threads) out << thread_to_json(thread).dump() << '\n';
    if (!out) throw Error("IoError", "short write to " + path.string());
}

std::vector<EmailThread> read_threads(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string());
    std::vector<EmailThread> threads;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        threads.push_back(thread_from_json(nlohmann::json::parse(line)));
    }
    return threads;
}

std::string render_thread(const EmailThread& thread) {
    std::ostringstream out;
    out << "Subject: " << thread.subject_normalized << '\n';
    for (const RawMessage& message : thread.messages) {
        out << "--- message from " << message.sender << " at " << message.date << " ---\n"
            << message.body << '\n';
    }
    return out.str();
}

}  // namespace genomebench::ingest
