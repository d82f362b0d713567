import numpy as np
import pytest

from motionweaver import build_database
from motionweaver import synthetic


@pytest.fixture(scope="session")
def skel():
    return synthetic.skeleton()


@pytest.fixture(scope="session")
def bundle():
    return synthetic.bundle()


@pytest.fixture(scope="session")
def db(bundle):
    skel, clips, anns = bundle
    return build_database(skel, clips, anns)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_skeleton(rng, n_joints=29):
    """Random joint tree with a consistent bilateral pairing for FK tests."""
    from motionweaver.skeleton import Joint, Skeleton

    joints = []
    for i in range(n_joints):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        joints.append(
            Joint(
                name=f"j{i}",
                parent=int(rng.integers(-1, i)),
                offset=rng.uniform(-0.3, 0.3, 3),
                axis=axis,
                mirror=i,
                mirror_sign=1.0,
            )
        )
    skel = Skeleton(joints=tuple(joints), left_foot_body=1, right_foot_body=n_joints)
    skel.validate()
    return skel


def random_frame(rng, n_joints=29):
    from motionweaver.skeleton import Frame

    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return Frame(
        root_pos=rng.uniform(-2, 2, 3),
        root_quat=q,
        joint_angles=rng.uniform(-np.pi, np.pi, n_joints),
    )
