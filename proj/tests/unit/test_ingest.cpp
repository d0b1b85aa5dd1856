#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "genomebench/ingest.hpp"

namespace gb = genomebench;
using namespace gb::ingest;

namespace {

const char* kThreeMessageMbox =
    "From alice@x.org Mon Jan  6 09:15:00 2020\n"
    "From: Alice <alice@x.org>\n"
    "Date: Mon, 6 Jan 2020 09:15:00 +0000\n"
    "Subject: help\n"
    "Message-ID: <m1@x>\n"
    "\n"
    "Does anyone know why my digest fails?\n"
    "From bob@x.org Mon Jan  6 10:00:00 2020\n"
    "From: Bob <bob@x.org>\n"
    "Date: Mon, 6 Jan 2020 10:00:00 +0000\n"
    "Subject: Re: help\n"
    "Message-ID: <m2@x>\n"
    "In-Reply-To: <m1@x>\n"
    "\n"
    "Check the buffer.\n"
    "From carol@y.org Tue Jan  7 09:00:00 2020\n"
    "From: Carol <carol@y.org>\n"
    "Date: Tue, 7 Jan 2020 09:00:00 +0000\n"
    "Subject: unrelated topic\n"
    "Message-ID: <m3@y>\n"
    "\n"
    "Separate discussion entirely.\n";

ParseResult parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse_mbox(in);
}

std::filesystem::path fixture(const char* name) {
    return std::filesystem::path(GB_FIXTURE_DIR) / name;
}

}  // namespace

TEST_CASE("empty archive yields an empty list plus a zero report") {
    const auto result = parse_string("");
    CHECK(result.threads.empty());
    CHECK(result.report.messages_read == 0);
    CHECK(result.report.threads_formed == 0);
    CHECK(result.report.messages_dropped == 0);
}

TEST_CASE("three messages form two threads of sizes 2 and 1") {
    const auto result = parse_string(kThreeMessageMbox);
    REQUIRE(result.threads.size() == 2);
    CHECK(result.report.messages_read == 3);
    CHECK(result.report.messages_dropped == 0);
    std::vector<std::size_t> sizes{result.threads[0].messages.size(),
                                   result.threads[1].messages.size()};
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{1, 2});

    for (const auto& thread : result.threads) {
        if (thread.messages.size() == 2) {
            CHECK(thread.subject_normalized == "help");
            CHECK(thread.messages[0].date <= thread.messages[1].date);
        }
    }
}

TEST_CASE(">From escaping is undone in bodies") {
    const std::string mbox =
        "From a@x Mon Jan  6 09:15:00 2020\n"
        "From: A <a@x.org>\n"
        "Date: Mon, 6 Jan 2020 09:15:00 +0000\n"
        "Subject: quoting\n"
        "Message-ID: <q1@x>\n"
        "\n"
        "first line\n"
        ">From the beginning it failed\n"
        ">>From deeper quoting\n";
    const auto result = parse_string(mbox);
    REQUIRE(result.threads.size() == 1);
    CHECK(result.report.messages_read == 1);
    const std::string& body = result.threads[0].messages[0].body;
    CHECK(body.find("From the beginning it failed") != std::string::npos);
    CHECK(body.find(">From deeper quoting") != std::string::npos);  // one level stripped
    CHECK(body.find(">>From") == std::string::npos);
}

TEST_CASE("subject grouping only applies to linkage-free messages") {
    // Same normalized subject, but the second message replies to an unknown id:
    // linkage is authoritative, so the two do not merge.
    const std::string mbox =
        "From a@x Mon Jan  6 09:15:00 2020\n"
        "From: A <a@x.org>\n"
        "Date: Mon, 6 Jan 2020 09:15:00 +0000\n"
        "Subject: shared subject\n"
        "Message-ID: <s1@x>\n"
        "\n"
        "no linkage headers here\n"
        "From b@x Mon Jan  6 10:15:00 2020\n"
        "From: B <b@x.org>\n"
        "Date: Mon, 6 Jan 2020 10:15:00 +0000\n"
        "Subject: Re: shared subject\n"
        "Message-ID: <s2@x>\n"
        "In-Reply-To: <elsewhere@z>\n"
        "\n"
        "replying to a message outside the archive\n";
    const auto result = parse_string(mbox);
    CHECK(result.threads.size() == 2);
}

TEST_CASE("fixture archive: partition, counts, and decoding") {
    const auto result = parse_mbox_file(fixture("threads.mbox"));
    CHECK(result.report.messages_read == 21);
    CHECK(result.report.messages_dropped == 1);  // the message without a Date
    CHECK(result.report.threads_formed == 8);
    REQUIRE(result.threads.size() == 8);

    std::size_t total = 0;
    for (const auto& thread : result.threads) {
        total += thread.messages.size();
        for (std::size_t i = 1; i < thread.messages.size(); ++i) {
            CHECK(thread.messages[i - 1].date <= thread.messages[i].date);
        }
    }
    CHECK(total + static_cast<std::size_t>(result.report.messages_dropped) ==
          static_cast<std::size_t>(result.report.messages_read));

    bool sawMicrograms = false;
    bool sawUnescapedFrom = false;
    bool sawBase64 = false;
    for (const auto& thread : result.threads) {
        for (const auto& message : thread.messages) {
            if (message.body.find("8 µg of library DNA") != std::string::npos) sawMicrograms = true;
            if (message.body.find("From the beginning you should also bank") != std::string::npos) {
                sawUnescapedFrom = true;
            }
            if (message.body.find("Addgene stocks it") != std::string::npos) sawBase64 = true;
        }
    }
    CHECK(sawMicrograms);      // quoted-printable =C2=B5 decoded
    CHECK(sawUnescapedFrom);   // >From unescaped
    CHECK(sawBase64);          // base64 body decoded
}

TEST_CASE("parsing is deterministic") {
    const auto first = parse_mbox_file(fixture("threads.mbox"));
    const auto second = parse_mbox_file(fixture("threads.mbox"));
    REQUIRE(first.threads.size() == second.threads.size());
    for (std::size_t i = 0; i < first.threads.size(); ++i) {
        CHECK(thread_to_json(first.threads[i]).dump() == thread_to_json(second.threads[i]).dump());
    }
}

TEST_CASE("undecodable bytes are replaced with U+FFFD and counted") {
    const std::string mbox =
        "From a@x Mon Jan  6 09:15:00 2020\n"
        "From: A <a@x.org>\n"
        "Date: Mon, 6 Jan 2020 09:15:00 +0000\n"
        "Subject: bad qp\n"
        "Message-ID: <bad1@x>\n"
        "Content-Transfer-Encoding: quoted-printable\n"
        "\n"
        "valid =C2=B5g then a broken escape =ZZ here\n"
        "From b@x Mon Jan  6 10:15:00 2020\n"
        "From: B <b@x.org>\n"
        "Date: Mon, 6 Jan 2020 10:15:00 +0000\n"
        "Subject: raw byte\n"
        "Message-ID: <bad2@x>\n"
        "\n"
        "stray byte \xFF inside\n";
    const auto result = parse_string(mbox);
    CHECK(result.report.messages_read == 2);
    CHECK(result.report.messages_dropped == 0);  // bad bytes never drop a message
    CHECK(result.report.undecodable_bytes == 2);
    bool sawReplacement = false;
    bool sawMicro = false;
    for (const auto& thread : result.threads) {
        for (const auto& message : thread.messages) {
            if (message.body.find("\xEF\xBF\xBD") != std::string::npos) sawReplacement = true;
            if (message.body.find("µg") != std::string::npos) sawMicro = true;
        }
    }
    CHECK(sawReplacement);
    CHECK(sawMicro);
}

TEST_CASE("duplicate message ids keep the first occurrence") {
    const std::string mbox =
        "From a@x Mon Jan  6 09:15:00 2020\n"
        "From: A <a@x.org>\n"
        "Date: Mon, 6 Jan 2020 09:15:00 +0000\n"
        "Subject: once\n"
        "Message-ID: <dup@x>\n"
        "\n"
        "original\n"
        "From a@x Mon Jan  6 09:20:00 2020\n"
        "From: A <a@x.org>\n"
        "Date: Mon, 6 Jan 2020 09:20:00 +0000\n"
        "Subject: once\n"
        "Message-ID: <dup@x>\n"
        "\n"
        "duplicate\n";
    const auto result = parse_string(mbox);
    CHECK(result.report.messages_read == 2);
    CHECK(result.report.messages_dropped == 1);
    REQUIRE(result.threads.size() == 1);
    CHECK(result.threads[0].messages[0].body == "original");
}

TEST_CASE("normalize_subject strips reply prefixes and case") {
    CHECK(normalize_subject("Re: Re: FWD: Help with PCR ") == "help with pcr");
    CHECK(normalize_subject("  Plain  subject ") == "plain subject");
    CHECK(normalize_subject("") == "");
}

TEST_CASE("parse_date handles offsets and zone names") {
    CHECK(parse_date("Mon, 6 Jan 2020 09:15:00 +0000").value() == 1578302100);
    CHECK(parse_date("6 Jan 2020 09:15:00 +0000").value() == 1578302100);
    CHECK(parse_date("Mon, 6 Jan 2020 10:15:00 +0100").value() == 1578302100);
    CHECK(parse_date("Mon, 6 Jan 2020 04:15:00 EST").value() == 1578302100);
    CHECK(parse_date("Fri, 6 Mar 2020 11:30:00 +0530").value() ==
          parse_date("Fri, 6 Mar 2020 06:00:00 +0000").value());
    CHECK_FALSE(parse_date("not a date").has_value());
    CHECK_FALSE(parse_date("32 Jan 2020 00:00:00 +0000").has_value());
}

TEST_CASE("anonymize replaces senders and body mentions in first-appearance order") {
    const std::string mbox =
        "From xavier@lab.org Mon Jan  6 09:15:00 2020\n"
        "From: Xavier Quinn <xavier@lab.org>\n"
        "Date: Mon, 6 Jan 2020 09:15:00 +0000\n"
        "Subject: intro\n"
        "Message-ID: <a1@x>\n"
        "\n"
        "Hi, I am Xavier and my address is xavier@lab.org.\n"
        "From yvonne@lab.org Mon Jan  6 10:15:00 2020\n"
        "From: Yvonne Reyes <yvonne@lab.org>\n"
        "Date: Mon, 6 Jan 2020 10:15:00 +0000\n"
        "Subject: Re: intro\n"
        "Message-ID: <a2@x>\n"
        "In-Reply-To: <a1@x>\n"
        "\n"
        "Write to xavier@lab.org, he knows. Quinn answered my question.\n";
    const auto parsed = parse_string(mbox);
    REQUIRE(parsed.threads.size() == 1);

    const auto [anonymized, map] = anonymize_thread(parsed.threads[0]);
    CHECK(anonymized.messages[0].sender == "PersonA");
    CHECK(anonymized.messages[1].sender == "PersonB");
    CHECK(map.alias_by_identity.size() == 2);
    CHECK(map.alias_for("xavier@lab.org") == "PersonA");

    CHECK(anonymized.messages[0].body.find("xavier@lab.org") == std::string::npos);
    CHECK(anonymized.messages[0].body.find("Xavier") == std::string::npos);
    CHECK(anonymized.messages[0].body.find("PersonA") != std::string::npos);
    CHECK(anonymized.messages[1].body.find("PersonA") != std::string::npos);  // body mention of A
    CHECK(anonymized.messages[1].body.find("Quinn") == std::string::npos);

    // idempotence on its own output
    const auto [again, secondMap] = anonymize_thread(anonymized);
    for (std::size_t i = 0; i < again.messages.size(); ++i) {
        CHECK(again.messages[i].sender == anonymized.messages[i].sender);
        CHECK(again.messages[i].body == anonymized.messages[i].body);
    }
}

TEST_CASE("single-sender thread gets a one-entry alias map") {
    const auto parsed = parse_string(
        "From solo@x.org Mon Jan  6 09:15:00 2020\n"
        "From: Solo Author <solo@x.org>\n"
        "Date: Mon, 6 Jan 2020 09:15:00 +0000\n"
        "Subject: note\n"
        "Message-ID: <solo1@x>\n"
        "\n"
        "Just a note with no other participants.\n");
    REQUIRE(parsed.threads.size() == 1);
    const auto [anonymized, map] = anonymize_thread(parsed.threads[0]);
    CHECK(map.alias_by_identity.size() == 1);
    CHECK(anonymized.messages[0].sender == "PersonA");
}

TEST_CASE("alias naming continues past Z") {
    CHECK(alias_for_index(0) == "PersonA");
    CHECK(alias_for_index(25) == "PersonZ");
    CHECK(alias_for_index(26) == "PersonAA");
    CHECK(alias_for_index(27) == "PersonAB");
}

TEST_CASE("parser survives arbitrary input and keeps the partition invariant") {
    const std::array<std::string, 10> pieces = {
        "From a@x Mon Jan  6 09:15:00 2020\n",
        "From: Someone <s@x.org>\n",
        "Date: Mon, 6 Jan 2020 09:15:00 +0000\n",
        "Date: not even a date\n",
        "Subject: fuzz\n",
        "Message-ID: <m@x>\n",
        "In-Reply-To: <gone@x>\n",
        "\n",
        "random body text with µ and =ZZ and >From quoting\n",
        ": no header name\n",
    };
    std::mt19937_64 gen(2025);
    for (int trial = 0; trial < 200; ++trial) {
        std::string document;
        const std::size_t chunks = gen() % 40;
        for (std::size_t c = 0; c < chunks; ++c) {
            document += pieces[gen() % pieces.size()];
            if (gen() % 7 == 0) document += static_cast<char>(gen() % 256);
        }
        const auto result = parse_string(document);
        std::size_t total = 0;
        for (const auto& thread : result.threads) {
            REQUIRE_FALSE(thread.messages.empty());
            total += thread.messages.size();
        }
        CHECK(total + static_cast<std::size_t>(result.report.messages_dropped) ==
              static_cast<std::size_t>(result.report.messages_read));
        CHECK(result.report.threads_formed == static_cast<int>(result.threads.size()));
    }
}

TEST_CASE("thread jsonl round trip holds the documented schema") {
    const auto result = parse_string(kThreeMessageMbox);
    const auto path = std::filesystem::temp_directory_path() / "gb_threads.jsonl";
    write_threads(path, result.threads);
    const auto readBack = read_threads(path);
    REQUIRE(readBack.size() == result.threads.size());
    const nlohmann::json j = thread_to_json(readBack[0]);
    CHECK(j.contains("thread_id"));
    CHECK(j.contains("subject"));
    REQUIRE(j.contains("messages"));
    for (const char* key : {"id", "sender", "date", "body"}) {
        CHECK(j["messages"][0].contains(key));
    }
    std::filesystem::remove(path);
}
