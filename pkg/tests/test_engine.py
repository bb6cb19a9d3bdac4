import json
import random

import pytest

from orchestra.dsl import SourceUnit, TypeTag, encode
from orchestra.engine import (
    DeployMessage,
    Engine,
    InMemoryNetwork,
    LocalDirectory,
    RunState,
    Value,
    ValueEnvelope,
    ValueMessage,
    envelope_from_wire,
    envelope_to_wire,
)
from orchestra.errors import (
    CompileError,
    DuplicateDeploymentError,
    DuplicateValueError,
    EngineStateError,
    InvocationError,
    TransportError,
    TypeMismatchError,
)
from orchestra.partitioner import as_single_composite, compose
from orchestra.qos import EngineInfo
from orchestra.sim import EventLoop

from conftest import load_source, make_registry
from oracles import random_invocation_graph
from test_partitioner import BASE_UID, golden_plan

ENDPOINTS = {"eA": "http://engines.test/eA", "eB": "http://engines.test/eB",
             "eC": "http://engines.test/eC"}


def make_engine(env, network, engine_id="eA", directory=None, resolver=None):
    info = EngineInfo(engine_id, ENDPOINTS[engine_id], "r1")
    directory = directory or LocalDirectory(env, open_world=True)
    engine = Engine(info, env, network.bind(info.endpoint), directory, resolver or make_registry())
    network.register(info.endpoint, engine.handle_message)
    return engine


def test_deploy_with_local_input_runs_and_forwards():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine_a = make_engine(env, network, "eA")
    engine_b = make_engine(env, network, "eB")
    uid = engine_a.deploy(load_source("listing2.orc"), initial_inputs={"a": Value(7, 5.0)})
    env.run()
    record = engine_a.completion(uid)
    assert record.state is RunState.COMPLETED
    assert [d.variable for d in record.dispatches] == ["c"]
    assert record.dispatches[0].receipt.status == "delivered"
    assert (BASE_UID, "c") in engine_b.buffered


def test_deploy_before_input_stays_waiting():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine = make_engine(env, network, "eB")
    network.register(ENDPOINTS["eC"], lambda m: None)
    uid = engine.deploy(load_source("listing3.orc"))
    env.run()
    assert engine.deployments[uid].state is RunState.WAITING


def test_malformed_text_raises_and_registers_nothing():
    env = EventLoop()
    engine = make_engine(env, InMemoryNetwork(env))
    with pytest.raises(CompileError):
        engine.deploy(SourceUnit("workflow w\nthis is -> not valid\n"))
    assert engine.deployments == {}


def test_duplicate_deployment_rejected():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine = make_engine(env, network, "eB")
    network.register(ENDPOINTS["eC"], lambda m: None)
    engine.deploy(load_source("listing3.orc"))
    with pytest.raises(DuplicateDeploymentError):
        engine.deploy(load_source("listing3.orc"))


def test_arriving_value_triggers_execution():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine_b = make_engine(env, network, "eB")
    engine_c = make_engine(env, network, "eC")
    uid = engine_b.deploy(load_source("listing3.orc"))
    env.run()
    assert engine_b.deployments[uid].state is RunState.WAITING
    ack = engine_b.receive_value(ValueEnvelope(f"{BASE_UID}.2", "c", TypeTag.INT, 5.0, 12))
    assert ack.status == "accepted"
    env.run()
    record = engine_b.completion(uid)
    assert record.state is RunState.COMPLETED
    assert sorted(d.variable for d in record.dispatches) == ["d", "e"]
    assert set(engine_c.buffered) == {(BASE_UID, "d"), (BASE_UID, "e")}


def test_unknown_uid_is_buffered_and_acked():
    env = EventLoop()
    engine = make_engine(env, InMemoryNetwork(env))
    ack = engine.receive_value(ValueEnvelope("mystery", "v", TypeTag.INT, 1.0, 1))
    assert ack.status == "buffered"
    assert ("mystery", "v") in engine.buffered


def test_duplicate_value_rejected():
    env = EventLoop()
    engine = make_engine(env, InMemoryNetwork(env))
    engine.receive_value(ValueEnvelope("mystery", "v", TypeTag.INT, 1.0, 1))
    with pytest.raises(DuplicateValueError):
        engine.receive_value(ValueEnvelope("mystery", "v", TypeTag.INT, 1.0, 2))


def test_type_mismatch_on_arrival():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine = make_engine(env, network, "eB")
    network.register(ENDPOINTS["eC"], lambda m: None)
    engine.deploy(load_source("listing3.orc"))
    with pytest.raises(TypeMismatchError):
        engine.receive_value(ValueEnvelope(f"{BASE_UID}.2", "c", TypeTag.STRING, 1.0, "nope"))


def test_early_arrival_before_deployment():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine_b = make_engine(env, network, "eB")
    network.register(ENDPOINTS["eC"], lambda m: None)
    engine_b.receive_value(ValueEnvelope(BASE_UID, "c", TypeTag.INT, 5.0, 12))
    uid = engine_b.deploy(load_source("listing3.orc"))
    env.run()
    assert engine_b.completion(uid).state is RunState.COMPLETED


def test_aggregation_waits_for_both_parameters():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine_c = make_engine(env, network, "eC")
    engine_a = make_engine(env, network, "eA")
    uid = engine_c.deploy(load_source("listing4.orc"))
    engine_c.receive_value(ValueEnvelope(BASE_UID, "d", TypeTag.INT, 2.0, 5))
    env.run()
    assert engine_c.deployments[uid].state is RunState.WAITING
    engine_c.receive_value(ValueEnvelope(BASE_UID, "e", TypeTag.INT, 3.0, 6))
    env.run()
    record = engine_c.completion(uid)
    assert record.state is RunState.COMPLETED
    order = [t.node_id.split(".")[0] for t in record.trace]
    assert order.index("p5") < order.index("p6")
    assert [d.variable for d in record.dispatches] == ["x"]
    assert (BASE_UID, "x") in engine_a.buffered


def test_fanout_consumers_observe_identical_payloads(dag6_graph, registry):
    env = EventLoop()
    network = InMemoryNetwork(env)
    seen: dict[str, list] = {"Op4": [], "Op5": []}

    def capture(operation, args):
        if operation in seen:
            seen[operation].append(args["par1"].payload)
        ordered = [args[k] for k in sorted(args)]
        return Value(sum(v.payload for v in ordered), sum(v.size_mb for v in ordered))

    directory = LocalDirectory(env)
    for i in range(1, 7):
        directory.register_function(f"Service{i}", f"Port{i}", capture)
    engine = make_engine(env, network, "eA", directory=directory, resolver=registry)
    text = encode(as_single_composite(dag6_graph, uid=BASE_UID)).text
    uid = engine.deploy(SourceUnit(text), initial_inputs={"a": Value(3, 1.0)})
    env.run()
    assert engine.completion(uid).state is RunState.COMPLETED
    assert seen["Op4"] == seen["Op5"] != []


def test_single_invocation_empty_dispatch_list(registry):
    env = EventLoop()
    engine = make_engine(env, InMemoryNetwork(env), resolver=registry)
    src = SourceUnit(
        "workflow tiny\n"
        "description d1 is http://registry.test/documents/service1.json\n"
        "service s1 is d1.Service1\nport p1 is s1.Port1\n"
        "input:\n int a\noutput:\n int x\na -> p1.Op1\np1.Op1 -> x\n"
    )
    uid = engine.deploy(src, initial_inputs={"a": Value(1, 1.0)})
    env.run()
    record = engine.completion(uid)
    assert record.state is RunState.COMPLETED
    assert record.dispatches == []
    assert set(record.outputs) == {"x"}


def test_forward_receipt_carries_link_cost():
    env = EventLoop()
    latency, bandwidth = 0.08, 10.0
    network = InMemoryNetwork(env, cost=lambda s, d, mb: latency + mb / bandwidth)
    engine_a = make_engine(env, network, "eA")
    make_engine(env, network, "eB")
    env_value = ValueEnvelope(BASE_UID, "c", TypeTag.INT, 5.0, 1)
    record = engine_a.forward_value(env_value, "eB", ENDPOINTS["eB"])
    env.run()
    assert record.receipt.status == "delivered"
    assert record.receipt.transfer_seconds == pytest.approx(latency + 5.0 / bandwidth)

    zero = ValueEnvelope(BASE_UID, "z", TypeTag.INT, 0.0, 1)
    record2 = engine_a.forward_value(zero, "eB", ENDPOINTS["eB"])
    env.run()
    assert record2.receipt.transfer_seconds == pytest.approx(latency)


def test_forward_to_unreachable_endpoint_fails_after_retries():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine = make_engine(env, network, "eA")
    value = ValueEnvelope(BASE_UID, "c", TypeTag.INT, 1.0, 1)
    record = engine.forward_value(value, "eX", "http://engines.test/nowhere")
    env.run()
    assert record.attempts == 3
    assert record.receipt.status == "failed"
    assert isinstance(record.receipt.error, TransportError)
    # exponential backoff in virtual time: attempts at 0, 0.5 and 1.5 seconds
    assert env.now() == pytest.approx(1.5)


def test_rejected_value_fails_sending_workflow():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine_a = make_engine(env, network, "eA")
    engine_b = make_engine(env, network, "eB")
    engine_b.receive_value(ValueEnvelope(BASE_UID, "c", TypeTag.INT, 5.0, 1))  # occupy slot
    uid = engine_a.deploy(load_source("listing2.orc"), initial_inputs={"a": Value(7, 5.0)})
    env.run()
    dep = engine_a.deployments[uid]
    assert dep.state is RunState.FAILED
    assert any(isinstance(e, TransportError) for e in dep.errors)
    assert any(isinstance(e, DuplicateValueError) for e in dep.errors)


def test_execute_requires_inputs():
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine = make_engine(env, network, "eB")
    network.register(ENDPOINTS["eC"], lambda m: None)
    uid = engine.deploy(load_source("listing3.orc"))
    with pytest.raises(EngineStateError):
        engine.execute(uid)


def test_service_fault_fails_workflow_without_forwards(registry):
    env = EventLoop()
    network = InMemoryNetwork(env)
    directory = LocalDirectory(env)

    def boom(operation, args):
        raise RuntimeError("service exploded")

    directory.register_function("Service1", "Port1", boom)
    directory.register_function("Service2", "Port2", boom)
    engine = make_engine(env, network, "eA", directory=directory, resolver=registry)
    make_engine(env, network, "eB")
    uid = engine.deploy(load_source("listing2.orc"), initial_inputs={"a": Value(1, 1.0)})
    env.run()
    record = engine.completion(uid)
    assert record.state is RunState.FAILED
    assert record.dispatches == []
    assert any(isinstance(e, InvocationError) for e in record.errors)


def test_distributed_handoff_across_three_engines(dag6_graph, registry):
    """Composites deployed on three engines complete by exchanging forwards."""
    subs, plan = golden_plan(dag6_graph)
    composites = compose(dag6_graph, subs, plan, sink="eA", base_uid=BASE_UID)

    env = EventLoop()
    network = InMemoryNetwork(env)
    engines = {}
    for eid in ("eA", "eB", "eC"):
        directory = LocalDirectory(env)
        for i in range(1, 7):
            directory.register_function(f"Service{i}", f"Port{i}")
        engines[eid] = make_engine(env, network, eid, directory=directory, resolver=registry)
    sink_received = []
    engines["eA"].value_listeners.append(lambda envlp: sink_received.append(envlp))

    uids = {}
    for comp in composites:
        inputs = {"a": Value(3, 5.0)} if comp.ordinal == 1 else None
        uids[comp.host_engine] = engines[comp.host_engine].deploy(
            encode(comp), initial_inputs=inputs
        )
    env.run()

    for comp in composites:
        record = engines[comp.host_engine].completion(uids[comp.host_engine])
        assert record.state is RunState.COMPLETED
        assert sorted((d.variable, d.destination_engine) for d in record.dispatches) == \
            sorted(comp.forwards)
    finals = [e for e in sink_received if e.variable == "x"]
    assert len(finals) == 1

    # same answer as running the un-partitioned workflow on one engine
    solo_env = EventLoop()
    solo_net = InMemoryNetwork(solo_env)
    directory = LocalDirectory(solo_env)
    for i in range(1, 7):
        directory.register_function(f"Service{i}", f"Port{i}")
    solo = make_engine(solo_env, solo_net, "eA", directory=directory, resolver=registry)
    text = encode(as_single_composite(dag6_graph, uid="solo0")).text
    uid = solo.deploy(SourceUnit(text), initial_inputs={"a": Value(3, 5.0)})
    solo_env.run()
    assert solo.completion(uid).outputs["x"].payload == finals[0].payload


@pytest.mark.parametrize("graph_seed", range(6))
def test_random_dags_fire_once_in_order_with_identical_results(graph_seed):
    """Interleaving-independence: values equal across 10 tie-break seeds."""
    g = random_invocation_graph(random.Random(graph_seed), max_nodes=8, max_services=3)
    from oracles import resolver_for_graph

    resolver = resolver_for_graph(g)
    text = encode(as_single_composite(g, uid=f"rand{graph_seed}")).text
    results = []
    for tie_seed in range(10):
        env = EventLoop(tie_seed=tie_seed)
        network = InMemoryNetwork(env)
        engine = make_engine(env, network, "eA", directory=LocalDirectory(env, open_world=True),
                             resolver=resolver)
        uid = engine.deploy(SourceUnit(text), initial_inputs={"a": Value(1, 1.0)})
        env.run()
        record = engine.completion(uid)
        assert record.state is RunState.COMPLETED
        fired = [t.node_id for t in record.trace]
        assert len(fired) == len(set(fired)) == len(g.invocation_nodes())
        for trace in record.trace:
            assert trace.started_at >= trace.inputs_ready_at - 1e-12
        results.append({k: v.payload for k, v in record.outputs.items()})
    assert all(r == results[0] for r in results)


def test_envelope_wire_round_trip():
    for tag, payload in [(TypeTag.INT, 42), (TypeTag.STRING, "hello"), (TypeTag.ANY, {"k": [1, 2]})]:
        env = ValueEnvelope("uid123.2", "var", tag, 3.25, payload)
        wire = envelope_to_wire(env)
        assert '"payload_b64"' in wire and '"uid"' in wire
        back = envelope_from_wire(wire)
        assert back == env


def test_protocol_messages_wire_round_trip():
    from orchestra.engine import AckMessage, message_from_wire, message_to_wire

    messages = [
        DeployMessage("workflow w\ninput:\n int a\noutput:\n int x\na -> x\n", "w.orc"),
        ValueMessage(ValueEnvelope("uid123.1", "c", TypeTag.INT, 5.0, 12)),
        AckMessage("m-42", "ok"),
    ]
    for message in messages:
        wire = message_to_wire(message)
        assert json.loads(wire)["kind"] in ("DEPLOY", "VALUE", "ACK")
        assert message_from_wire(wire) == message


def test_deploy_message_over_wire_protocol(registry):
    env = EventLoop()
    network = InMemoryNetwork(env)
    engine_b = make_engine(env, network, "eB", resolver=registry)
    network.register(ENDPOINTS["eC"], lambda m: None)
    network.deliver(
        ENDPOINTS["eA"], ENDPOINTS["eB"],
        DeployMessage(load_source("listing3.orc").text), 0.001,
        on_delivered=None, on_rejected=None,
    )
    env.run()
    assert f"{BASE_UID}.2" in engine_b.deployments
