#include <sys/stat.h>

#include <catch2/catch_amalgamated.hpp>

#include "afsl/protocol.hpp"
#include "afsl/synthetic.hpp"
#include "test_util.hpp"

using namespace afsl;
using Catch::Matchers::ContainsSubstring;

namespace {

LabelSet two_labels() { return LabelSet{{"neg", "pos"}, false, {}}; }

TrainRequest sample_request() {
    TrainRequest req;
    req.request_id = "req-7";
    req.iteration = 3;
    req.label_set = two_labels();
    req.support = {{10, {0}}, {11, {1}}};
    req.pool_ids = {20, 21, 22};
    req.validation_ids = {30};
    req.evaluation_ids = {40, 41};
    return req;
}

TrainerResponse sample_response() {
    TrainerResponse resp;
    resp.request_id = "req-7";
    resp.cold_start = false;
    resp.timings = {1.25, 0.5};
    for (SampleId id : {20, 21, 22}) {
        SampleInference inf;
        inf.id = id;
        inf.en = {0.1 * static_cast<double>(id), -2.75, 1.0 / 3.0};
        inf.logits = Matrix{{-1.5, 2.25}, {0.0, -0.125}};
        resp.pool_inference.push_back(std::move(inf));
    }
    resp.predictions = {{40, {0}}, {41, {1}}};
    return resp;
}

void make_executable_script(const std::string& path, const std::string& body) {
    testutil::write_file(path, "#!/bin/sh\n" + body);
    ::chmod(path.c_str(), 0755);
}

}  // namespace

TEST_CASE("request round trip preserves every field") {
    testutil::TempDir dir("proto-req");
    const TrainRequest req = sample_request();
    const auto path = dir.file("request");
    protocol::write_request(req, path);
    const TrainRequest back = protocol::read_request(path);

    CHECK(back.request_id == req.request_id);
    CHECK(back.iteration == req.iteration);
    CHECK(back.label_set.labels == req.label_set.labels);
    CHECK(back.label_set.multi_label == req.label_set.multi_label);
    REQUIRE(back.support.size() == 2);
    CHECK(back.support[0].id == 10);
    CHECK(back.support[0].labels == LabelIndexSet{0});
    CHECK(back.pool_ids == req.pool_ids);
    CHECK(back.validation_ids == req.validation_ids);
    CHECK(back.evaluation_ids == req.evaluation_ids);
}

TEST_CASE("request round trip carries the vocabulary map") {
    testutil::TempDir dir("proto-vocab");
    TrainRequest req = sample_request();
    req.label_set.vocab = LabelVocabMap{{501, 502}, {{"negative sentiment", "neg"}}};
    const auto path = dir.file("request");
    protocol::write_request(req, path);
    const TrainRequest back = protocol::read_request(path);
    REQUIRE(back.label_set.vocab.has_value());
    CHECK(back.label_set.vocab->token_ids == std::vector<std::int64_t>{501, 502});
    CHECK(back.label_set.vocab->substitutions.at("negative sentiment") == "neg");
}

TEST_CASE("response round trip is lossless for finite values") {
    testutil::TempDir dir("proto-resp");
    const TrainerResponse resp = sample_response();
    const auto path = dir.file("response");
    protocol::write_response(resp, two_labels(), path);
    const TrainerResponse back = protocol::read_response(path, two_labels());

    CHECK(back.request_id == resp.request_id);
    CHECK(back.cold_start == resp.cold_start);
    CHECK(back.timings.fine_tune_seconds == resp.timings.fine_tune_seconds);
    CHECK(back.timings.inference_seconds == resp.timings.inference_seconds);
    REQUIRE(back.pool_inference.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.pool_inference[i].id == resp.pool_inference[i].id);
        CHECK(back.pool_inference[i].en == resp.pool_inference[i].en);       // bit-exact
        CHECK(back.pool_inference[i].logits == resp.pool_inference[i].logits);
    }
    CHECK(back.predictions == resp.predictions);
}

TEST_CASE("response round trip survives awkward doubles bit-exactly") {
    testutil::TempDir dir("proto-bits");
    TrainerResponse resp = sample_response();
    Rng rng(99);
    for (auto& inf : resp.pool_inference) {
        for (auto& v : inf.en) v = (rng.uniform() - 0.5) * std::pow(10.0, rng.bounded(30));
        for (auto& v : inf.logits.data()) v = -rng.uniform() * 1e-200;
    }
    const auto path = dir.file("response");
    protocol::write_response(resp, two_labels(), path);
    const TrainerResponse back = protocol::read_response(path, two_labels());
    for (std::size_t i = 0; i < resp.pool_inference.size(); ++i) {
        CHECK(back.pool_inference[i].en == resp.pool_inference[i].en);
        CHECK(back.pool_inference[i].logits == resp.pool_inference[i].logits);
    }
}

TEST_CASE("non-finite values are rejected on write and on read") {
    testutil::TempDir dir("proto-nan");
    TrainerResponse resp = sample_response();
    resp.pool_inference[0].en[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(protocol::write_response(resp, two_labels(), dir.file("r1")), ProtocolError);

    // a rogue trainer writing null gets caught at parse time
    const auto path = dir.file("r2");
    testutil::write_file(
        path,
        R"({"record":"header","version":"afsl/1","request_id":"x","status":"ok"})"
        "\n"
        R"({"record":"inference","id":20,"en":[null],"logits":[[0.0,0.0]]})"
        "\n");
    try {
        protocol::read_response(path, two_labels());
        FAIL("expected a validation error");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolError::Kind::validation);
    }
}

TEST_CASE("version mismatch is a hard error in both directions") {
    testutil::TempDir dir("proto-ver");
    const auto req_path = dir.file("request");
    testutil::write_file(req_path,
                         R"({"record":"header","version":"afsl/999","labels":["a","b"]})"
                         "\n");
    try {
        protocol::read_request(req_path);
        FAIL("expected a version error");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolError::Kind::version_mismatch);
    }

    const auto resp_path = dir.file("response");
    testutil::write_file(resp_path,
                         R"({"record":"header","version":"afsl/0","request_id":"x"})"
                         "\n");
    try {
        protocol::read_response(resp_path, two_labels());
        FAIL("expected a version error");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolError::Kind::version_mismatch);
    }
}

TEST_CASE("validation names the missing pool id") {
    const TrainRequest req = sample_request();
    TrainerResponse resp = sample_response();
    resp.pool_inference.erase(resp.pool_inference.begin() + 1);  // drop id 21
    CHECK_THROWS_WITH(protocol::validate_response(resp, req),
                      ContainsSubstring("missing inference for pool id 21"));
}

TEST_CASE("validation catches duplicates, mismatches, and missing predictions") {
    const TrainRequest req = sample_request();

    SECTION("duplicate inference") {
        TrainerResponse resp = sample_response();
        resp.pool_inference.push_back(resp.pool_inference.front());
        CHECK_THROWS_WITH(protocol::validate_response(resp, req),
                          ContainsSubstring("duplicate inference for id 20"));
    }
    SECTION("wrong logit width") {
        TrainerResponse resp = sample_response();
        resp.pool_inference[0].logits = Matrix{{1.0, 2.0, 3.0}};
        CHECK_THROWS_WITH(protocol::validate_response(resp, req),
                          ContainsSubstring("logit columns"));
    }
    SECTION("inconsistent en dimension") {
        TrainerResponse resp = sample_response();
        resp.pool_inference[2].en = {1.0};
        CHECK_THROWS_WITH(protocol::validate_response(resp, req),
                          ContainsSubstring("dimension differs"));
    }
    SECTION("missing prediction") {
        TrainerResponse resp = sample_response();
        resp.predictions.pop_back();
        CHECK_THROWS_WITH(protocol::validate_response(resp, req),
                          ContainsSubstring("missing prediction for evaluation id 41"));
    }
    SECTION("request id mismatch") {
        TrainerResponse resp = sample_response();
        resp.request_id = "other";
        CHECK_THROWS_WITH(protocol::validate_response(resp, req),
                          ContainsSubstring("request_id"));
    }
}

TEST_CASE("echo trainer double: the engine reads back exactly what was written") {
    testutil::TempDir dir("proto-echo");
    const TrainRequest req = sample_request();
    TrainerResponse canned = sample_response();

    // pre-write the response; the "trainer" just announces its path
    const auto canned_path = dir.file("canned_response");
    protocol::write_response(canned, req.label_set, canned_path);
    const auto script = dir.file("echo_trainer.sh");
    make_executable_script(script, "echo \"RESPONSE " + canned_path + "\"\n");

    ExternalTrainer trainer("/bin/sh " + script, dir.path() / "work");
    TrainRequest numbered = req;
    const TrainerResponse got = trainer.run(numbered);

    CHECK(got.request_id == canned.request_id);
    REQUIRE(got.pool_inference.size() == canned.pool_inference.size());
    for (std::size_t i = 0; i < got.pool_inference.size(); ++i) {
        CHECK(got.pool_inference[i].id == canned.pool_inference[i].id);
        CHECK(got.pool_inference[i].en == canned.pool_inference[i].en);
        CHECK(got.pool_inference[i].logits == canned.pool_inference[i].logits);
    }
    CHECK(got.predictions == canned.predictions);
    // and the request landed on disk where the protocol says it does
    CHECK(std::filesystem::exists(dir.path() / "work" / "iter_3" / "request"));
}

TEST_CASE("nonzero exit status is its own error kind") {
    testutil::TempDir dir("proto-exit");
    const auto script = dir.file("fail.sh");
    make_executable_script(script, "exit 3\n");
    ExternalTrainer trainer("/bin/sh " + script, dir.path() / "work");
    TrainRequest req = sample_request();
    try {
        trainer.run(req);
        FAIL("expected an exit-status error");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolError::Kind::exit_status);
        CHECK_THAT(e.what(), ContainsSubstring("status 3"));
    }
}

TEST_CASE("a silent trainer is a validation error") {
    testutil::TempDir dir("proto-silent");
    const auto script = dir.file("silent.sh");
    make_executable_script(script, "exit 0\n");
    ExternalTrainer trainer("/bin/sh " + script, dir.path() / "work");
    TrainRequest req = sample_request();
    CHECK_THROWS_WITH(trainer.run(req), ContainsSubstring("RESPONSE"));
}

TEST_CASE("slow trainers hit the timeout error kind") {
    testutil::TempDir dir("proto-slow");
    const auto script = dir.file("slow.sh");
    make_executable_script(script, "sleep 5\n");
    ExternalTrainer trainer("/bin/sh " + script, dir.path() / "work", 0.3);
    TrainRequest req = sample_request();
    const auto start = std::chrono::steady_clock::now();
    try {
        trainer.run(req);
        FAIL("expected a timeout");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolError::Kind::timeout);
    }
    const double elapsed = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 3.0);  // the child was killed, not awaited
}

TEST_CASE("serve_request answers a request with the built-in trainer") {
    testutil::TempDir dir("proto-serve");
    MixtureSpec spec;
    spec.num_classes = 2;
    spec.dimension = 2;
    spec.sigma = 0.2;
    spec.class_means = circle_means(2, 2, 6.0);
    spec.train_counts = {5, 5};
    spec.validation_counts = {2, 2};
    spec.test_counts = {2, 2};
    spec.seed = 3;
    const DatasetSplits ds = generate(spec);

    TrainRequest req;
    req.request_id = "serve-1";
    req.iteration = 0;
    req.label_set = ds.label_set;
    for (const auto& s : ds.train) req.pool_ids.push_back(s.id);
    for (const auto& s : ds.test) req.evaluation_ids.push_back(s.id);
    const auto req_path = dir.file("request");
    protocol::write_request(req, req_path);

    PrototypeTrainer trainer(ds);
    std::ostringstream announce;
    const std::string resp_path = serve_request(trainer, req_path, announce);
    CHECK_THAT(announce.str(), ContainsSubstring("RESPONSE "));

    const TrainerResponse resp = protocol::read_response(resp_path, ds.label_set);
    protocol::validate_response(resp, req);
    CHECK(resp.cold_start);
}
