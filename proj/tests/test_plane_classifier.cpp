#include "anchorpano/io.hpp"
#include "anchorpano/plane_classifier.hpp"

#include <doctest.h>
#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <thread>

using namespace anchorpano;

namespace {

BBox box(int h, int w) { return BBox{0, 0, h - 1, w - 1}; }

std::vector<BBox> boxes(std::size_t n, int side) { return std::vector<BBox>(n, box(side, side)); }

}  // namespace

TEST_CASE("prompt carries the plane marker") {
    const std::string p = build_prompt(3);
    CHECK(p.find("marked '3'") != std::string::npos);
    CHECK(p.find("outlined in red") != std::string::npos);
    CHECK(p.find("wall, floor, ceiling, bed, table, shelf, cabinet, window, door, or other") != std::string::npos);
    CHECK(build_prompt(0).find("marked '0'") != std::string::npos);
    CHECK(build_prompt(3) == p);
}

TEST_CASE("the last keyword occurrence decides") {
    CHECK(parse_response("...looks like a table near the wall... final answer: floor") == SurfaceKeyword::floor);
    CHECK_FALSE(parse_response("").has_value());
    CHECK_FALSE(parse_response("wallpaper").has_value());
    CHECK_FALSE(parse_response("walls and floors and ceilings").has_value());
    CHECK(parse_response("Final answer: WALL.") == SurfaceKeyword::wall);
    CHECK(parse_response("It might be a door, but it is a window") == SurfaceKeyword::window);
    CHECK(parse_response("wall\nfloor\nceiling") == SurfaceKeyword::ceiling);
    CHECK(parse_response("a wall-mounted shelf") == SurfaceKeyword::shelf);
    CHECK(parse_response("shelf on the wall") == SurfaceKeyword::wall);
    // Repeated earlier keyword does not beat a later one.
    CHECK(parse_response("floor floor floor other") == SurfaceKeyword::other);
}

TEST_CASE("parsing is idempotent and depends only on the text") {
    const std::vector<std::string> texts{"", "Cabinet", "x table y", "floorboard", "other wall"};
    for (const auto& t : texts) {
        const auto a = parse_response(t);
        const auto b = parse_response(t);
        CHECK(a == b);
        if (a) CHECK(parse_response(to_string(*a)) == a);
    }
}

TEST_CASE("bbox size rule") {
    CHECK(box(32, 32).large_enough());
    CHECK_FALSE(box(31, 200).large_enough());
    CHECK_FALSE(box(200, 31).large_enough());
    CHECK_FALSE(BBox{}.large_enough());

    Mask m(10, 12);
    m.at(2, 3) = m.at(7, 9) = 1;
    const BBox b = mask_bbox(m);
    CHECK(b.row_min == 2);
    CHECK(b.row_max == 7);
    CHECK(b.col_min == 3);
    CHECK(b.col_max == 9);
    CHECK(mask_bbox(Mask(4, 4)).empty());
}

TEST_CASE("majority vote over views") {
    using R = std::optional<std::string>;
    SUBCASE("wall wall table is layout") {
        const std::vector<R> r{"wall", "wall", "table"};
        auto v = vote_plane(1, r, boxes(3, 64));
        CHECK(v.label == PlaneLabel::layout);
        CHECK(v.semantic == SurfaceKeyword::wall);
    }
    SUBCASE("two-way tie is non-layout") {
        const std::vector<R> r{"wall", "table"};
        CHECK(vote_plane(1, r, boxes(2, 64)).label == PlaneLabel::non_layout);
    }
    SUBCASE("unparseable responses vote non-layout") {
        const std::vector<R> r{"wall", "no idea", "hmm"};
        CHECK(vote_plane(1, r, boxes(3, 64)).label == PlaneLabel::non_layout);
    }
    SUBCASE("small views are skipped") {
        const std::vector<R> r{"table", "table", "floor"};
        const std::vector<BBox> b{box(16, 16), box(40, 20), box(64, 64)};
        auto v = vote_plane(1, r, b);
        CHECK(v.skipped == std::vector<bool>{true, true, false});
        CHECK(v.label == PlaneLabel::layout);
        CHECK(v.semantic == SurfaceKeyword::floor);
    }
    SUBCASE("mixed layout keywords still count as layout") {
        const std::vector<R> r{"wall", "floor", "table"};
        CHECK(vote_plane(1, r, boxes(3, 64)).label == PlaneLabel::layout);
    }
    SUBCASE("mismatched lengths are rejected") {
        const std::vector<R> r{"wall"};
        CHECK_THROWS_AS(vote_plane(1, r, boxes(2, 64)), DataError);
    }
}

TEST_CASE("vote is invariant under view permutations") {
    std::vector<std::string> words{"wall", "table", "floor", "gibberish", "ceiling", "door"};
    std::vector<int> sides{64, 16, 64, 64, 33, 20};
    std::vector<std::size_t> order(words.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto run = [&](const std::vector<std::size_t>& o) {
        std::vector<std::optional<std::string>> r;
        std::vector<BBox> b;
        for (auto i : o) {
            r.emplace_back(words[i]);
            b.push_back(box(sides[i], sides[i]));
        }
        return vote_plane(7, r, b);
    };
    const auto ref = run(order);
    int perms = 0;
    do {
        const auto v = run(order);
        CHECK(v.label == ref.label);
        CHECK(v.semantic == ref.semantic);
        ++perms;
    } while (std::next_permutation(order.begin(), order.end()));
    CHECK(perms == 720);
}

TEST_CASE("fixture client replays transcripts keyed by request hash") {
    const std::string prompt = build_prompt(5);
    const std::vector<std::string> pngs{"view-a", "view-b", "view-c"};
    nlohmann::json transcripts = nlohmann::json::object();
    const std::vector<std::string> answers{"I think this is a wall.", "Probably the floor... final answer: wall",
                                           "table"};
    for (std::size_t i = 0; i < pngs.size(); ++i)
        transcripts[request_hash({5, pngs[i], prompt, kMaxResponseTokens})] = answers[i];
    auto client = FixtureVlmClient::from_json(transcripts);

    std::vector<PlaneView> views;
    for (const auto& p : pngs) views.push_back({box(64, 64), p});
    const auto v = classify_plane(5, views, client);
    CHECK(v.queries_issued == 3);
    CHECK(client.queries() == 3);
    CHECK(v.label == PlaneLabel::layout);
    CHECK(v.keywords[1] == SurfaceKeyword::wall);

    SUBCASE("small planes never reach the client") {
        FixtureVlmClient empty({});
        std::vector<PlaneView> small(4, PlaneView{box(16, 16), "x"});
        const auto s = classify_plane(5, small, empty);
        CHECK(s.label == PlaneLabel::non_layout);
        CHECK(s.queries_issued == 0);
        CHECK(empty.queries() == 0);
    }
    SUBCASE("unknown request is a service error") {
        std::vector<PlaneView> other{{box(64, 64), "unrecorded"}};
        CHECK_THROWS_AS(classify_plane(5, other, client), ServiceError);
    }
    SUBCASE("hash depends on prompt and image") {
        const VlmRequest a{5, "img", prompt, kMaxResponseTokens};
        CHECK(request_hash(a) == request_hash(a));
        CHECK(request_hash(a) != request_hash({5, "img2", prompt, kMaxResponseTokens}));
        CHECK(request_hash(a) != request_hash({6, "img", build_prompt(6), kMaxResponseTokens}));
    }
    SUBCASE("malformed fixtures are rejected") {
        CHECK_THROWS_AS(FixtureVlmClient::from_json(nlohmann::json::array()), DataError);
        CHECK_THROWS_AS(FixtureVlmClient::from_json({{"h", 3}}), DataError);
    }
}

TEST_CASE("highlight rendering") {
    Image img(64, 48, 3, 0.5f);
    SUBCASE("full-frame mask outlines the border") {
        Mask m(48, 64, 1);
        const auto h = render_highlight(img, m, 4);
        CHECK(h.components == 1);
        for (int c = 0; c < 64; ++c) {
            CHECK(h.image.at(0, c, 0) == 1.0f);
            CHECK(h.image.at(0, c, 1) == 0.0f);
            CHECK(h.image.at(47, c, 0) == 1.0f);
        }
        for (int r = 0; r < 48; ++r) {
            CHECK(h.image.at(r, 0, 0) == 1.0f);
            CHECK(h.image.at(r, 63, 2) == 0.0f);
        }
        // Interior pixel away from the marker is tinted, not outlined.
        CHECK(h.image.at(3, 3, 0) == doctest::Approx(0.6f));
        CHECK(h.image.at(3, 3, 1) == doctest::Approx(0.4f));
        CHECK(h.marker_row == 24);
        CHECK(h.marker_col == 32);
    }
    SUBCASE("disjoint mask: contour per component, marker on the largest") {
        Mask m(48, 64);
        // Small block rows 2..9, cols 2..9; large block rows 10..45, cols 30..61.
        for (int r = 2; r < 10; ++r)
            for (int c = 2; c < 10; ++c) m.at(r, c) = 1;
        for (int r = 10; r < 46; ++r)
            for (int c = 30; c < 62; ++c) m.at(r, c) = 1;
        const auto h = render_highlight(img, m, 12);
        CHECK(h.components == 2);
        CHECK(h.marker_row == 28);  // round(27.5) away from zero
        CHECK(h.marker_col == 46);  // round(45.5)
        CHECK(h.image.at(2, 5, 0) == 1.0f);
        CHECK(h.image.at(9, 5, 0) == 1.0f);
        CHECK(h.image.at(5, 5, 0) == doctest::Approx(0.6f));
        CHECK(h.image.at(10, 40, 0) == 1.0f);
        // Outside the mask stays untouched.
        CHECK(h.image.at(30, 15, 0) == 0.5f);
    }
    SUBCASE("empty and tiny masks are rejected") {
        CHECK_THROWS_AS(render_highlight(img, Mask(48, 64), 1), DataError);
        Mask one(48, 64);
        one.at(10, 10) = 1;
        CHECK_THROWS_AS(render_highlight(img, one, 1), DataError);
        CHECK_THROWS_AS(render_highlight(img, Mask(10, 10, 1), 1), DataError);
    }
}

TEST_CASE("http client speaks the chat-completions protocol") {
    httplib::Server server;
    std::string seen_auth, seen_body;
    server.Post("/api/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        const auto j = nlohmann::json::parse(req.body);
        if (j.at("model") == "fail") {
            res.status = 503;
            return;
        }
        if (j.at("model") == "parts") {
            res.set_content(
                R"({"choices":[{"message":{"content":[{"type":"text","text":"it is a "},{"type":"text","text":"ceiling"}]}}]})",
                "application/json");
            return;
        }
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Final answer: floor"}}]})",
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string endpoint = "http://127.0.0.1:" + std::to_string(port) + "/api/";
    const VlmRequest req{2, std::string("\x89PNG", 4), build_prompt(2), kMaxResponseTokens};

    HttpVlmClient ok({endpoint, "vlm-test", "secret", 5});
    CHECK(parse_response(ok.complete(req)) == SurfaceKeyword::floor);
    CHECK(seen_auth == "Bearer secret");
    const auto body = nlohmann::json::parse(seen_body);
    CHECK(body.at("max_tokens") == 200);
    const auto& content = body.at("messages").at(0).at("content");
    CHECK(content.at(0).at("image_url").at("url") == "data:image/png;base64,iVBORw==");
    CHECK(content.at(1).at("text") == build_prompt(2));

    HttpVlmClient parts({endpoint, "parts", "", 5});
    CHECK(parts.complete(req) == "it is a ceiling");
    CHECK(seen_auth.empty());

    HttpVlmClient failing({endpoint, "fail", "", 5});
    CHECK_THROWS_AS(failing.complete(req), ServiceError);

    server.stop();
    th.join();

    HttpVlmClient down({endpoint, "vlm-test", "", 1});
    CHECK_THROWS_AS(down.complete(req), ServiceError);
    CHECK_THROWS_AS(HttpVlmClient({"", "m", "", 5}), ConfigError);
}

TEST_CASE("heuristic fallback") {
    const Vec3 up(0, 1, 0);
    const std::vector<double> cams{1.4, 1.6};
    Plane floor{0, Vec3(0, 1, 0), 0.0};
    Plane ceiling{1, Vec3(0, -1, 0), 2.8};
    Plane wall{2, Vec3(1, 0, 0), 2.0};
    Plane table{3, Vec3(0, 1, 0), -1.5};
    Plane tilted{4, Vec3(0.6, 0.8, 0), 0.0};

    auto v = heuristic_classify(floor, up, cams, 4.0);
    CHECK(v.label == PlaneLabel::layout);
    CHECK(v.semantic == SurfaceKeyword::floor);
    CHECK(heuristic_classify(ceiling, up, cams, 4.0).semantic == SurfaceKeyword::ceiling);
    CHECK(heuristic_classify(wall, up, cams, 3.0).label == PlaneLabel::layout);
    CHECK(heuristic_classify(wall, up, cams, 0.4).label == PlaneLabel::non_layout);
    // Tabletop at camera height (between the two cameras).
    CHECK(heuristic_classify(table, up, cams, 1.0).label == PlaneLabel::non_layout);
    CHECK(heuristic_classify(tilted, up, cams, 5.0).label == PlaneLabel::non_layout);
    CHECK_THROWS_AS(heuristic_classify(floor, Vec3(0, 2, 0), cams, 1.0), DataError);
}
