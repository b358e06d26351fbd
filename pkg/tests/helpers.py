"""Shared pipeline helpers for the test suite."""

import numpy as np

from aprfm import assemble, basis, collocation, problems, quadrature, \
    reference, solve

TWO_PI = 2.0 * np.pi


def spatial_bounds(spec):
    return list(zip(spec.x_lo, spec.x_hi))


def velocity_bounds(spec):
    return (-1.0, 1.0) if spec.spatial_dim == 1 else (0.0, TWO_PI)


def build_models(spec, j_rho, j_g, m_spatial, m_velocity, seed,
                 activation="tanh", pou_kind="phi_b"):
    sb = spatial_bounds(spec)
    rho_part = basis.uniform_partition(sb, m_spatial)
    g_part = basis.uniform_partition(sb + [velocity_bounds(spec)],
                                     list(m_spatial) + [m_velocity])
    rho_model = basis.make_model(rho_part, j_rho, seed=2 * seed,
                                 activation=activation, pou_kind=pou_kind)
    g_model = basis.make_model(g_part, j_g, seed=2 * seed + 1,
                               activation=activation, pou_kind=pou_kind)
    return rho_model, g_model


def build_f_model(spec, j, m_spatial, m_velocity, seed, activation="tanh",
                  pou_kind="phi_b"):
    part = basis.uniform_partition(
        spatial_bounds(spec) + [velocity_bounds(spec)],
        list(m_spatial) + [m_velocity])
    return basis.make_model(part, j, seed=seed, activation=activation,
                            pou_kind=pou_kind)


def solve_aprfm(spec, j_rho, j_g, n_spatial, n_velocity, m_spatial=(1,),
                m_velocity=1, seed=0, n_quad=16, activation="tanh"):
    """Assemble + rescale + solve; returns (models, solve report, system)."""
    if spec.spatial_dim == 2 and len(m_spatial) == 1:
        m_spatial = (1, 1)
    rule = quadrature.angular_rule(spec.spatial_dim, n_quad)
    colloc = collocation.build_collocation(spec, n_spatial, n_velocity)
    rho_model, g_model = build_models(spec, j_rho, j_g, m_spatial,
                                      m_velocity, seed, activation=activation)
    system = assemble.rescale_rows(
        assemble.assemble_aprfm(spec, rho_model, g_model, colloc, rule))
    report = solve.lstsq(system)
    return (rho_model, g_model), report, system


def aprfm_f_error(spec, j_rho, j_g, n_spatial, n_velocity, reference_field,
                  **kwargs):
    """Relative l2 error of the rebuilt f on the evaluation phase grid."""
    models, report, _ = solve_aprfm(spec, j_rho, j_g, n_spatial, n_velocity,
                                    **kwargs)
    eval_x, eval_v = collocation.evaluation_grid(spec)
    values = assemble.reconstruct_f(spec, models[0], models[1],
                                    report.coeffs, eval_x, eval_v)
    approx = reference.phase_field(eval_x, eval_v, values)
    return reference.relative_l2(approx, reference_field)


def aprfm_rho_error(spec, j_rho, j_g, n_spatial, n_velocity, reference_field,
                    n_quad=16, **kwargs):
    """Relative l2 density error on the spatial evaluation grid."""
    models, report, _ = solve_aprfm(spec, j_rho, j_g, n_spatial, n_velocity,
                                    n_quad=n_quad, **kwargs)
    rule = quadrature.angular_rule(spec.spatial_dim, n_quad)
    xs = collocation.evaluation_spatial_grid(spec)
    approx = reference.density_field(spec, rule, xs, rho_model=models[0],
                                     g_model=models[1], coeffs=report.coeffs)
    return reference.relative_l2(approx, reference_field)


def rfm_f_error(spec, j, n_spatial, n_velocity, m_spatial=(1,),
                m_velocity=1, seed=0, n_quad=16):
    """Vanilla one-shot solve; error of f on the evaluation phase grid."""
    rule = quadrature.angular_rule(spec.spatial_dim, n_quad)
    colloc = collocation.build_collocation(spec, n_spatial, n_velocity)
    model = build_f_model(spec, j, m_spatial, m_velocity, seed)
    system = assemble.rescale_rows(
        assemble.assemble_rfm(spec, model, colloc, rule))
    report = solve.lstsq(system)
    eval_x, eval_v = collocation.evaluation_grid(spec)
    phase = np.concatenate([eval_x, eval_v[:, None]], axis=1)
    values = basis.model_values(model, report.coeffs, phase)
    approx = reference.phase_field(eval_x, eval_v, values)
    ref = reference.exact_field(spec, (eval_x, eval_v))
    return reference.relative_l2(approx, ref)


def exact_field_for(spec):
    return reference.exact_field(spec, collocation.evaluation_grid(spec))


def exact_rho_field(spec):
    xs = collocation.evaluation_spatial_grid(spec)
    return reference.GridField(points=xs, values=spec.exact_rho(xs))
