from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from lateral_vision.classification.golden import GoldenFormatException, replay_traces
from lateral_vision.classification.narration import narrate


class Command(BaseCommand):
    help = 'Replays the recorded perceptions of the golden decisions through the analysis of the engine'

    def add_arguments(self, parser):
        parser.add_argument('--golden', help=f'Golden traces file, {settings.GOLDEN_TRACES_FILE} by default')
        parser.add_argument('--narrate', action='store_true', default=False)

    def handle(self, *args, **options):
        try:
            results = replay_traces(options['golden'])
        except (OSError, GoldenFormatException) as exc:
            raise CommandError(str(exc))

        for result in results:
            if result.passed:
                self.stdout.write(self.style.SUCCESS(f'PASS {result.case.name} -> {result.trace.final_label.species} '
                                                     f'by {result.trace.rule.value}'))
            else:
                self.stdout.write(self.style.ERROR(f'FAIL {result.case.name}: {"; ".join(result.failures)}'))
            if options['narrate']:
                self.stdout.write(narrate(result.trace))

        failed = [result.case.name for result in results if not result.passed]
        if failed:
            raise CommandError(f'{len(failed)} golden cases failed: {", ".join(failed)}')
        self.stdout.write(self.style.SUCCESS(f'{len(results)} golden cases reproduced'))
