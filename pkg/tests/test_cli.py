"""Client tests: session, REPL, script runner, load generator, CLI entry."""

import io

import pytest

from minirel.client import (
    ClientSession,
    LoadScenario,
    ScriptReport,
    format_response,
    main,
    prepare_course,
    repl,
    run_load,
    run_script,
)
from minirel.protocol import CountResult, ErrorResult, RowsResult


class TestFormatResponse:
    def test_count(self):
        assert format_response(CountResult(3)) == "count: 3"

    def test_error_with_message(self):
        assert format_response(ErrorResult("SYNTAX", "bad token")) == \
            "ERR SYNTAX bad token"

    def test_error_without_message(self):
        assert format_response(ErrorResult("INTERNAL", "")) == "ERR INTERNAL"

    def test_rows_aligned(self):
        response = RowsResult(("id", "name"), (("1", "amy"), ("23", "bo")))
        assert format_response(response) == (
            "id  name\n"
            "--  ----\n"
            "1   amy\n"
            "23  bo\n"
            "(2 rows)")

    def test_empty_rows(self):
        assert format_response(RowsResult(("id",), ())) == \
            "id\n--\n(0 rows)"


class TestClientSession:
    def test_execute_round_trip(self, start_server):
        server = start_server()
        with ClientSession(server.host, server.port) as session:
            assert session.execute(
                "create table t (a int primary key)") == CountResult(0)
            assert session.execute("insert into t values (5)") == CountResult(1)
            result = session.execute("select a from t")
            assert result == RowsResult(("a",), (("5",),))
            error = session.execute("select a from ghost")
            assert error.code == "UNKNOWN_TABLE"


class TestRepl:
    def run_repl(self, server, text):
        output = io.StringIO()
        code = repl(server.host, server.port,
                    input_stream=io.StringIO(text), output_stream=output)
        return code, output.getvalue()

    def test_session_golden(self, start_server):
        server = start_server()
        code, out = self.run_repl(
            server,
            "create table t (a int primary key, b str(4))\n"
            "insert into t values (1, 'ab')\n"
            "select * from t\n"
            "\\q\n")
        assert code == 0
        assert out == (
            "minirel> count: 0\n"
            "minirel> count: 1\n"
            "minirel> a  b\n"
            "-  --\n"
            "1  ab\n"
            "(1 rows)\n"
            "minirel> ")

    def test_errors_echoed_and_session_continues(self, start_server):
        server = start_server()
        code, out = self.run_repl(
            server, "select oops\ncreate table t (a int primary key)\n\\q\n")
        assert code == 0
        assert "ERR SYNTAX" in out
        assert "count: 0" in out

    def test_blank_lines_skipped(self, start_server):
        server = start_server()
        code, out = self.run_repl(server, "\n  \n\\q\n")
        assert code == 0
        assert out == "minirel> minirel> minirel> "

    def test_eof_ends_session(self, start_server):
        server = start_server()
        code, out = self.run_repl(server, "")
        assert code == 0
        assert out == "minirel> \n"


class TestRunScript:
    def write_script(self, tmp_path, text):
        path = tmp_path / "script.sql"
        path.write_text(text, encoding="utf-8")
        return path

    def test_all_statements_succeed(self, start_server, tmp_path):
        server = start_server()
        path = self.write_script(
            tmp_path,
            "-- setup\n"
            "create table s (a int primary key)\n"
            "insert into s values (1)\n"
            "\n"
            "select a from s\n")
        output = io.StringIO()
        report = run_script(path, server.host, server.port,
                            output_stream=output)
        assert report == ScriptReport(executed=3, errors=0,
                                      first_error_line=None)
        assert "count: 1" in output.getvalue()
        assert "(1 rows)" in output.getvalue()

    def test_stops_at_first_error_with_line_number(self, start_server,
                                                   tmp_path):
        server = start_server()
        path = self.write_script(
            tmp_path,
            "create table s (a int primary key)\n"
            "insert into s values (1)\n"
            "\n"
            "insert into s values (1)\n"
            "insert into s values (2)\n")
        output = io.StringIO()
        report = run_script(path, server.host, server.port,
                            output_stream=output)
        assert report.executed == 3
        assert report.errors == 1
        assert report.first_error_line == 4
        assert f"{path}:4: ERR CONSTRAINT" in output.getvalue()
        with ClientSession(server.host, server.port) as session:
            assert session.execute("select a from s").rows == (("1",),)

    def test_keep_going_runs_everything(self, start_server, tmp_path):
        server = start_server()
        path = self.write_script(
            tmp_path,
            "create table s (a int primary key)\n"
            "insert into s values (1)\n"
            "insert into s values (1)\n"
            "insert into s values (2)\n")
        output = io.StringIO()
        report = run_script(path, server.host, server.port, keep_going=True,
                            output_stream=output)
        assert report.executed == 4
        assert report.errors == 1
        assert report.first_error_line == 3
        with ClientSession(server.host, server.port) as session:
            rows = session.execute("select a from s").rows
            assert sorted(rows) == [("1",), ("2",)]


class TestLoadgen:
    def test_small_course_fills_exactly(self, start_server):
        server = start_server(worker_count=4)
        prepare_course(server.host, server.port, 3)
        report = run_load(LoadScenario(server.host, server.port,
                                       capacity=3, clients=8, seed=7))
        assert report.attempts == 8
        assert report.successes == 3
        assert report.constraint_rejections == 5
        assert report.errors == 0
        assert (report.successes + report.constraint_rejections
                + report.errors == report.attempts)
        assert report.elapsed > 0
        with ClientSession(server.host, server.port) as session:
            capacity = session.execute("select capacity from course where id = 1")
            assert capacity.rows == (("0",),)
            enrolled = session.execute("select student from enrollment")
            assert len(enrolled.rows) == 3
            assert len(set(enrolled.rows)) == 3

    def test_underfull_course_accepts_everyone(self, start_server):
        server = start_server(worker_count=4)
        prepare_course(server.host, server.port, 10)
        report = run_load(LoadScenario(server.host, server.port,
                                       capacity=10, clients=4, seed=1))
        assert report.successes == 4
        assert report.constraint_rejections == 0
        assert report.errors == 0
        with ClientSession(server.host, server.port) as session:
            capacity = session.execute("select capacity from course where id = 1")
            assert capacity.rows == (("6",),)

    def test_prepare_course_twice_fails(self, start_server):
        server = start_server()
        prepare_course(server.host, server.port, 3)
        with pytest.raises(RuntimeError, match="TABLE_EXISTS"):
            prepare_course(server.host, server.port, 3)


class TestMain:
    def test_script_exit_codes(self, start_server, tmp_path, capsys):
        server = start_server()
        good = tmp_path / "good.sql"
        good.write_text("create table m (a int primary key)\n"
                        "insert into m values (1)\n", encoding="utf-8")
        assert main(["--port", str(server.port), "--script", str(good)]) == 0
        assert "count: 1" in capsys.readouterr().out

        bad = tmp_path / "bad.sql"
        bad.write_text("insert into m values (1)\n", encoding="utf-8")
        assert main(["--port", str(server.port), "--script", str(bad)]) == 1
        assert "ERR CONSTRAINT" in capsys.readouterr().out

    def test_loadgen_reports(self, start_server, capsys):
        server = start_server(worker_count=4)
        code = main(["--port", str(server.port), "--loadgen",
                     "--capacity", "2", "--clients", "5", "--seed", "3"])
        assert code == 0
        out = capsys.readouterr().out
        assert "attempts: 5" in out
        assert "successes: 2" in out
        assert "constraint_rejections: 3" in out
        assert "errors: 0" in out

    def test_script_and_loadgen_conflict(self, start_server):
        server = start_server()
        with pytest.raises(SystemExit):
            main(["--port", str(server.port), "--script", "x",
                  "--loadgen"])
