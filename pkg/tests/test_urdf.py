import numpy as np
import pytest

from gskit.assets.urdf import UrdfError, parse_kinematic_tree


def wrap(body: str) -> str:
    return f'<robot name="r">{body}</robot>'


def test_single_fixed_link():
    tree = parse_kinematic_tree(wrap('<link name="only"/>'))
    assert tree.root == "only"
    assert len(tree.links) == 1
    assert tree.joints == []
    assert tree.dof == 0


def test_two_link_revolute_chain():
    tree = parse_kinematic_tree(wrap('''
        <link name="a"/><link name="b"/>
        <joint name="j" type="revolute">
          <parent link="a"/><child link="b"/>
          <origin xyz="0.1 0 0"/><axis xyz="0 0 1"/>
          <limit lower="-1" upper="1"/>
        </joint>'''))
    assert len(tree.joints) == 1
    assert tree.joints[0].child == "b"
    assert tree.root == "a"
    np.testing.assert_allclose(tree.joints[0].axis, [0, 0, 1])


def test_seven_joint_serial_chain_topological_order():
    links = "".join(f'<link name="l{i}"/>' for i in range(8))
    joints = "".join(
        f'''<joint name="j{i}" type="revolute">
              <parent link="l{i}"/><child link="l{i + 1}"/>
              <axis xyz="0 0 1"/><limit lower="-3" upper="3"/>
            </joint>'''
        for i in range(7)
    )
    tree = parse_kinematic_tree(wrap(links + joints))
    assert [j.name for j in tree.joints] == [f"j{i}" for i in range(7)]
    assert tree.dof == 7


def test_shuffled_declaration_still_topological():
    body = '''
        <link name="c"/><link name="a"/><link name="b"/>
        <joint name="bc" type="fixed"><parent link="b"/><child link="c"/></joint>
        <joint name="ab" type="fixed"><parent link="a"/><child link="b"/></joint>
    '''
    tree = parse_kinematic_tree(wrap(body))
    assert [j.name for j in tree.joints] == ["ab", "bc"]
    for j in tree.joints:  # root-first invariant
        earlier = {tree.root} | {k.child for k in tree.joints[: tree.joints.index(j)]}
        assert j.parent in earlier


def test_cycle_detected():
    body = '''
        <link name="a"/><link name="b"/>
        <joint name="ab" type="fixed"><parent link="a"/><child link="b"/></joint>
        <joint name="ba" type="fixed"><parent link="b"/><child link="a"/></joint>
    '''
    with pytest.raises(UrdfError, match="cycle|multiple parent"):
        parse_kinematic_tree(wrap(body))


def test_multiple_roots_rejected():
    with pytest.raises(UrdfError, match="multiple roots"):
        parse_kinematic_tree(wrap('<link name="a"/><link name="b"/>'))


def test_missing_axis_rejected():
    body = '''
        <link name="a"/><link name="b"/>
        <joint name="j" type="prismatic">
          <parent link="a"/><child link="b"/><limit lower="0" upper="1"/>
        </joint>'''
    with pytest.raises(UrdfError, match="missing axis"):
        parse_kinematic_tree(wrap(body))


def test_limit_inversion_rejected():
    body = '''
        <link name="a"/><link name="b"/>
        <joint name="j" type="revolute">
          <parent link="a"/><child link="b"/><axis xyz="1 0 0"/>
          <limit lower="2" upper="-2"/>
        </joint>'''
    with pytest.raises(UrdfError, match="limit inversion"):
        parse_kinematic_tree(wrap(body))


def test_unsupported_joint_type_rejected():
    body = '''
        <link name="a"/><link name="b"/>
        <joint name="j" type="continuous">
          <parent link="a"/><child link="b"/><axis xyz="1 0 0"/>
        </joint>'''
    with pytest.raises(UrdfError, match="unsupported joint type"):
        parse_kinematic_tree(wrap(body))


def test_axis_normalized_on_load():
    body = '''
        <link name="a"/><link name="b"/>
        <joint name="j" type="revolute">
          <parent link="a"/><child link="b"/><axis xyz="0 0 5"/>
          <limit lower="-1" upper="1"/>
        </joint>'''
    tree = parse_kinematic_tree(wrap(body))
    np.testing.assert_allclose(np.linalg.norm(tree.joints[0].axis), 1.0, atol=1e-12)


def test_mesh_references_parsed():
    body = '''
        <link name="a">
          <visual><geometry><mesh filename="meshes/a.obj"/></geometry></visual>
          <collision><geometry><mesh filename="meshes/a_col.obj"/></geometry></collision>
        </link>'''
    tree = parse_kinematic_tree(wrap(body))
    assert tree.links[0].visual_mesh == "meshes/a.obj"
    assert tree.links[0].collision_mesh == "meshes/a_col.obj"
