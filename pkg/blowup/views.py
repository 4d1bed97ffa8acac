"""
Read-only JSON API over recorded runs.
"""
from django.http import JsonResponse
from django.views.decorators.http import require_http_methods

from .models import SimulationRun


@require_http_methods(["GET"])
def run_list(request):
    """List recorded runs, newest first; `?outcome=blew_up` filters."""
    runs = SimulationRun.objects.all()
    outcome = request.GET.get('outcome')
    if outcome:
        valid = {value for value, _ in SimulationRun.OUTCOME_CHOICES}
        if outcome not in valid:
            return JsonResponse({
                'message': f"Unknown outcome '{outcome}'",
                'valid': sorted(valid),
            }, status=400)
        runs = runs.filter(outcome=outcome)
    return JsonResponse({
        'count': runs.count(),
        'results': [run.to_dict() for run in runs],
    })


@require_http_methods(["GET"])
def run_detail(request, run_id):
    try:
        run = SimulationRun.objects.get(pk=run_id)
    except SimulationRun.DoesNotExist:
        return JsonResponse({
            'message': 'Run not found'
        }, status=404)
    data = run.to_dict()
    data['config_text'] = run.config_text
    return JsonResponse(data)
