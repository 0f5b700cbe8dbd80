from django.core.management.base import BaseCommand, CommandError

from lateral_vision.classification.types import InputDomainError
from lateral_vision.dataprep.synthetic import SyntheticSpec, generate_synthetic, write_dataset


class Command(BaseCommand):
    help = 'Generates the synthetic parts dataset and stores it as PNG images plus label, part and keypoint CSVs'

    def add_arguments(self, parser):
        defaults = SyntheticSpec()
        parser.add_argument('out', help='Output directory')
        parser.add_argument('--n-images', type=int, default=1600)
        parser.add_argument('--n-classes', type=int, default=defaults.n_classes)
        parser.add_argument('--image-size', type=int, default=defaults.image_size)
        parser.add_argument('--part-size', type=int, default=defaults.part_size)
        parser.add_argument('--jitter', type=int, default=defaults.jitter)
        parser.add_argument('--noise', type=float, default=defaults.noise, help='Std of the noise, 0-255 scale')
        parser.add_argument('--seed', type=int, default=defaults.seed)

    def handle(self, *args, **options):
        try:
            spec = SyntheticSpec(n_classes=options['n_classes'], image_size=options['image_size'],
                                 part_size=options['part_size'], jitter=options['jitter'], noise=options['noise'],
                                 seed=options['seed'])
            specimens = generate_synthetic(spec, options['n_images'])
        except InputDomainError as exc:
            raise CommandError(str(exc))
        directory = write_dataset(options['out'], specimens)
        self.stdout.write(self.style.SUCCESS(f'{len(specimens)} images of {spec.n_classes} classes stored on '
                                             f'{directory}'))
